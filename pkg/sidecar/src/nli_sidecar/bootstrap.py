"""Build a small randomly initialized cross-encoder for offline runs.

Production deployments fine-tune a published NLI cross-encoder checkpoint;
this factory exists for air-gapped environments and tests, where no model
hub is reachable. The vocabulary is word-level: every word you expect in
premises and hypotheses should be listed, everything else becomes [UNK].
"""
from __future__ import annotations

from pathlib import Path

SPECIAL_TOKENS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]


def _word_level_tokenizer(words: list[str], max_positions: int):
    from tokenizers import Tokenizer, models, normalizers, pre_tokenizers, processors
    from transformers import PreTrainedTokenizerFast

    vocab = {token: i for i, token in enumerate(SPECIAL_TOKENS + words)}
    tokenizer = Tokenizer(models.WordLevel(vocab, unk_token="[UNK]"))
    tokenizer.normalizer = normalizers.Lowercase()
    tokenizer.pre_tokenizer = pre_tokenizers.Whitespace()
    tokenizer.post_processor = processors.TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B:1 [SEP]:1",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    wrapped = PreTrainedTokenizerFast(
        tokenizer_object=tokenizer,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
        model_input_names=["input_ids", "token_type_ids", "attention_mask"],
    )
    wrapped.model_max_length = max_positions
    return wrapped, len(vocab)


def build_tiny_base(
    out_dir: str | Path,
    vocabulary: list[str],
    *,
    hidden_size: int = 64,
    num_layers: int = 2,
    num_heads: int = 2,
    max_positions: int = 96,
    seed: int = 7,
) -> str:
    import torch
    from transformers import BertConfig, BertForSequenceClassification

    torch.manual_seed(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    words = list(dict.fromkeys(w.lower() for w in vocabulary if w.strip()))
    tokenizer, vocab_size = _word_level_tokenizer(words, max_positions)
    tokenizer.save_pretrained(out)

    config = BertConfig(
        vocab_size=vocab_size,
        hidden_size=hidden_size,
        num_hidden_layers=num_layers,
        num_attention_heads=num_heads,
        intermediate_size=hidden_size * 2,
        max_position_embeddings=max_positions,
        num_labels=1,
    )
    model = BertForSequenceClassification(config)
    model.save_pretrained(out)
    return str(out)
