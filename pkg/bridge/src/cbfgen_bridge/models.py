"""Model loading: a causal generator plus a 3-class sentiment classifier.

The bridge owns every tokenizer crossing. Wire token ids are 1-based over the
generator's vocabulary; internally the models use the usual 0-based ids, so
wire id t maps to model id t - 1. The classifier has its own tokenizer: texts
arrive as generator token ids, get detokenized to a string, and are re-encoded
with the classifier's tokenizer (truncating from the left so the most recent
content survives).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import torch

LABEL_NAMES = ("negative", "neutral", "positive")


@dataclass
class ModelBundle:
    generator: torch.nn.Module
    generator_tokenizer: object
    classifier: torch.nn.Module
    classifier_tokenizer: object
    device: str = "cpu"
    # classifier output index for each of (negative, neutral, positive)
    label_order: tuple[int, int, int] = (0, 1, 2)
    classifier_max_tokens: int = field(default=512)

    @property
    def vocab_size(self) -> int:
        return int(self.generator.config.vocab_size)

    @property
    def eos_tokens(self) -> list[int]:
        eos = self.generator.config.eos_token_id
        if eos is None:
            return []
        ids = eos if isinstance(eos, (list, tuple)) else [eos]
        return [int(i) + 1 for i in ids]

    @property
    def max_context(self) -> int:
        config = self.generator.config
        for name in ("n_positions", "max_position_embeddings"):
            value = getattr(config, name, None)
            if value is not None:
                return int(value)
        return 4096


def _label_order(config) -> tuple[int, int, int]:
    """Map classifier output indices to (negative, neutral, positive)."""
    id2label = getattr(config, "id2label", None) or {}
    by_name = {str(v).lower(): int(k) for k, v in id2label.items()}
    if all(name in by_name for name in LABEL_NAMES):
        return tuple(by_name[name] for name in LABEL_NAMES)
    return (0, 1, 2)


def load_pretrained(
    generator_name: str,
    classifier_name: str,
    device: str = "cpu",
) -> ModelBundle:
    """Load a model pair from the hub or a local path.

    The defaults documented in the CLI are an 8B-parameter instruct-free
    causal model and a Twitter-trained 3-class sentiment classifier; any
    causal LM / sequence-classification pair with compatible tokenizers
    works.
    """
    from transformers import (
        AutoModelForCausalLM,
        AutoModelForSequenceClassification,
        AutoTokenizer,
    )

    generator = AutoModelForCausalLM.from_pretrained(generator_name).to(device).eval()
    gen_tok = AutoTokenizer.from_pretrained(generator_name)
    classifier = (
        AutoModelForSequenceClassification.from_pretrained(classifier_name)
        .to(device)
        .eval()
    )
    cls_tok = AutoTokenizer.from_pretrained(classifier_name)
    cls_tok.truncation_side = "left"
    max_tokens = min(
        int(getattr(classifier.config, "max_position_embeddings", 514)) - 2,
        int(getattr(cls_tok, "model_max_length", 512)),
    )
    return ModelBundle(
        generator=generator,
        generator_tokenizer=gen_tok,
        classifier=classifier,
        classifier_tokenizer=cls_tok,
        device=device,
        label_order=_label_order(classifier.config),
        classifier_max_tokens=max_tokens,
    )


def build_tiny(seed: int = 0) -> ModelBundle:
    """Small randomly initialized model pair, built offline, for tests.

    Both models share one word-level tokenizer over the synthetic vocabulary
    ("w0".."w63"), so the detokenize/retokenize crossing is exercised without
    any downloads. Weights are seeded and deterministic.
    """
    from tokenizers import Tokenizer
    from tokenizers.models import WordLevel
    from tokenizers.pre_tokenizers import Whitespace
    from transformers import (
        GPT2Config,
        GPT2ForSequenceClassification,
        GPT2LMHeadModel,
        PreTrainedTokenizerFast,
    )

    vocab_size = 64
    torch.manual_seed(seed)
    generator = GPT2LMHeadModel(
        GPT2Config(
            vocab_size=vocab_size,
            n_positions=128,
            n_embd=32,
            n_layer=2,
            n_head=2,
            bos_token_id=0,
            eos_token_id=1,
        )
    ).eval()
    # a causal classification head pools the final position, so the score
    # responds strongly to the most recent token; a freshly initialized
    # bidirectional model pools position 0 and barely notices appended tokens
    classifier = GPT2ForSequenceClassification(
        GPT2Config(
            vocab_size=vocab_size,
            n_positions=130,
            n_embd=32,
            n_layer=2,
            n_head=2,
            num_labels=3,
            bos_token_id=0,
            eos_token_id=1,
            pad_token_id=0,
        )
    ).eval()
    with torch.no_grad():
        # widen the random head so the sentiment margin (positive minus the
        # larger of the other two) gets usable spread on both sides of zero
        classifier.score.weight *= 25.0

    words = {f"w{i}": i for i in range(vocab_size)}
    words["[UNK]"] = vocab_size  # only reachable via /encode of unknown words
    tok = Tokenizer(WordLevel(words, unk_token="[UNK]"))
    tok.pre_tokenizer = Whitespace()

    def fast_tokenizer(max_len):
        t = PreTrainedTokenizerFast(
            tokenizer_object=tok, unk_token="[UNK]", pad_token="w0"
        )
        t.model_max_length = max_len
        t.truncation_side = "left"
        return t

    return ModelBundle(
        generator=generator,
        generator_tokenizer=fast_tokenizer(128),
        classifier=classifier,
        classifier_tokenizer=fast_tokenizer(24),
        device="cpu",
        label_order=(0, 1, 2),
        classifier_max_tokens=24,
    )


def generator_logits(bundle: ModelBundle, wire_tokens: Sequence[int]) -> torch.Tensor:
    """Final-position logits for a 1-based wire token sequence."""
    if wire_tokens:
        ids = [t - 1 for t in wire_tokens]
    else:
        bos = bundle.generator.config.bos_token_id
        if bos is None:
            raise ValueError("empty token sequence and the generator has no bos token")
        ids = [int(bos)]
    with torch.no_grad():
        input_ids = torch.tensor([ids], dtype=torch.long, device=bundle.device)
        out = bundle.generator(input_ids).logits[0, -1]
    return out.detach().cpu()


def classifier_scores(
    bundle: ModelBundle, wire_texts: Sequence[Sequence[int]]
) -> tuple[list[list[float]], list[bool]]:
    """Softmax (negative, neutral, positive) triples for a batch of texts."""
    triples = []
    truncated_flags = []
    for wire in wire_texts:
        text = bundle.generator_tokenizer.decode(
            [t - 1 for t in wire], skip_special_tokens=False
        )
        encoded = bundle.classifier_tokenizer(
            text,
            truncation=True,
            max_length=bundle.classifier_max_tokens,
            return_tensors="pt",
        )
        full_len = len(bundle.classifier_tokenizer(text)["input_ids"])
        truncated_flags.append(full_len > encoded["input_ids"].shape[1])
        with torch.no_grad():
            logits = bundle.classifier(
                encoded["input_ids"].to(bundle.device),
                attention_mask=encoded["attention_mask"].to(bundle.device),
            ).logits[0]
        probs = torch.softmax(logits.detach().cpu(), dim=-1)
        order = bundle.label_order
        triples.append([float(probs[order[0]]), float(probs[order[1]]),
                        float(probs[order[2]])])
    return triples, truncated_flags
