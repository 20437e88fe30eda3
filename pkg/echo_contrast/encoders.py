# -*- coding: utf-8 -*-

"""Small deterministic image and text encoders sharing one embedding space.

The image tower is flatten, affine, GELU, affine. The text tower averages the
embeddings of the words of a caption and, separately, of the adjacent word
pairs inside each phrase, then applies one affine layer. A phrase ends at a
word followed by punctuation, so a severity word stays attached to the
finding it grades ("severe la", "no la") and never to the finding before it
when a caption lists many findings.
"""

from collections import OrderedDict
from dataclasses import dataclass
import logging
from pathlib import Path

import numpy as np
import torch

from .embedding import DTYPE, EmbeddingBatch, Role, Temperature

logger = logging.getLogger(__name__)

UNKNOWN_TOKEN = "<unk>"
PUNCTUATION = ".,;:"
MAX_TOKENS = 128


def phrases_of(raw):
    """Lowercase and split into phrases of words, stripping punctuation from
    word ends. A word ending in punctuation closes its phrase."""
    phrases = []
    current = []
    for word in raw.lower().split():
        stripped = word.strip(PUNCTUATION)
        if stripped != "":
            current.append(stripped)
        if word.rstrip(PUNCTUATION) != word and len(current) > 0:
            phrases.append(current)
            current = []
    if len(current) > 0:
        phrases.append(current)
    return phrases


def words_of(raw):
    """Lowercase, split on whitespace and strip punctuation from word ends."""
    return [word for phrase in phrases_of(raw) for word in phrase]


def pairs_of(phrase):
    """The adjacent word pairs of a phrase, as 'first second'."""
    return [f"{a} {b}" for a, b in zip(phrase, phrase[1:])]


class Vocabulary:
    """The words and in-phrase word pairs of the text encoder.

    Word id 0 is the unknown-word fallback. Unknown pairs have no id and are
    left out of a text's bag of pairs.
    """

    def __init__(self, words=(), pairs=()):
        self.words = [UNKNOWN_TOKEN]
        self.index = {UNKNOWN_TOKEN: 0}
        self.pairs = []
        self.pair_index = {}
        for word in words:
            self.add(word)
        for pair in pairs:
            self.add_pair(pair)

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index

    def __eq__(self, other):
        return (
            isinstance(other, Vocabulary)
            and self.words == other.words
            and self.pairs == other.pairs
        )

    def add(self, word):
        if word not in self.index:
            self.index[word] = len(self.words)
            self.words.append(word)
        return self.index[word]

    def add_pair(self, pair):
        if len(pair.split()) != 2:
            raise ValueError(f"'{pair}' is not a pair of words")
        if pair not in self.pair_index:
            self.pair_index[pair] = len(self.pairs)
            self.pairs.append(pair)
        return self.pair_index[pair]

    def id(self, word):
        return self.index.get(word, 0)

    def pair_ids(self, phrase):
        """Ids of the known adjacent pairs of a phrase."""
        return [
            self.pair_index[p] for p in pairs_of(phrase) if p in self.pair_index
        ]

    @classmethod
    def from_texts(cls, texts):
        """Build a vocabulary from texts, words and pairs sorted for stable ids."""
        words = set()
        pairs = set()
        for text in texts:
            for phrase in phrases_of(text):
                words.update(phrase)
                pairs.update(pairs_of(phrase))
        words.discard(UNKNOWN_TOKEN)
        return cls(sorted(words), sorted(pairs))

    def save(self, path):
        """Write the words, one per line, followed by the pairs."""
        Path(path).write_text("\n".join(self.words + self.pairs) + "\n")

    @classmethod
    def load(cls, path):
        lines = Path(path).read_text().splitlines()
        if len(lines) == 0 or lines[0] != UNKNOWN_TOKEN:
            raise RuntimeError(f"{path} is not a vocabulary file")
        words = [line for line in lines[1:] if " " not in line]
        pairs = [line for line in lines[1:] if " " in line]
        return cls(words, pairs)


@dataclass(frozen=True)
class TextInput:
    """Word and pair ids of a caption and the string they came from."""

    tokens: tuple
    raw: str = ""
    pairs: tuple = ()


@dataclass(frozen=True)
class ImageInput:
    """Pixels in [0, 1] or, for synthetic data, a feature vector."""

    pixels: np.ndarray
    identifier: str = ""

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.size == 0 or 0 in pixels.shape:
            raise ValueError(f"Image '{self.identifier}' has no pixels")
        if not np.all(np.isfinite(pixels)):
            raise ValueError(f"Image '{self.identifier}' has non-finite pixels")
        object.__setattr__(self, "pixels", pixels)


def tokenize(raw, vocabulary, max_tokens=MAX_TOKENS):
    """Map a string to a TextInput; unknown words take the fallback id."""
    phrases = phrases_of(raw)
    n_words = sum(len(phrase) for phrase in phrases)
    if n_words > max_tokens:
        logger.warning(
            f"Truncating text of {n_words} words to {max_tokens}: '{raw[:40]}...'"
        )
        kept = []
        room = max_tokens
        for phrase in phrases:
            if room == 0:
                break
            kept.append(phrase[:room])
            room -= len(kept[-1])
        phrases = kept
    tokens = tuple(vocabulary.id(w) for phrase in phrases for w in phrase)
    pairs = tuple(i for phrase in phrases for i in vocabulary.pair_ids(phrase))
    return TextInput(tokens, raw, pairs)


class ImageTower(torch.nn.Module):
    def __init__(self, n_features, hidden_dim, embed_dim):
        super().__init__()
        self.layers = torch.nn.Sequential(
            torch.nn.Linear(n_features, hidden_dim, dtype=DTYPE),
            torch.nn.GELU(),
            torch.nn.Linear(hidden_dim, embed_dim, dtype=DTYPE),
        )

    def forward(self, x):
        return self.layers(x)


class TextTower(torch.nn.Module):
    def __init__(self, vocabulary_size, n_pairs, width, embed_dim):
        super().__init__()
        self.words = torch.nn.EmbeddingBag(
            vocabulary_size, width, mode="mean", dtype=DTYPE
        )
        # A vocabulary of single words still gets one (unused) pair row
        self.pairs = torch.nn.EmbeddingBag(
            max(n_pairs, 1), width, mode="mean", dtype=DTYPE
        )
        self.projection = torch.nn.Linear(width, embed_dim, dtype=DTYPE)

    def forward(self, sequences, pair_sequences):
        word_ids, word_offsets = _flatten(sequences)
        pair_ids, pair_offsets = _flatten(pair_sequences)
        x = self.words(word_ids, word_offsets)
        # Texts without known pairs have an empty bag, which contributes 0
        x = x + self.pairs(pair_ids, pair_offsets)
        return self.projection(x)


def _flatten(sequences):
    offsets = [0]
    flat = []
    for sequence in sequences:
        flat.extend(sequence)
        offsets.append(offsets[-1] + len(sequence))
    return (
        torch.tensor(flat, dtype=torch.long),
        torch.tensor(offsets[:-1], dtype=torch.long),
    )


@dataclass
class EncoderParams:
    """The flattened parameters with the slice each named tensor occupies."""

    vector: torch.Tensor
    slices: OrderedDict
    seed: int


class DualEncoder(torch.nn.Module):
    """The image and text towers, the shared temperature and the vocabulary.

    Parameters
    ----------
    vocabulary : Vocabulary
    n_features : int
        Length of the flattened image input.
    embed_dim : int
        The shared embedding dimension d.
    hidden_dim : int
        Width of the image tower's hidden layer and the text tower's
        word embeddings.
    seed : int
        Seeds the initial parameters. The global random state is untouched.
    """

    def __init__(self, vocabulary, n_features, embed_dim=32, hidden_dim=64, seed=0):
        super().__init__()
        self.vocabulary = vocabulary
        self.n_features = n_features
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.seed = seed

        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            self.image = ImageTower(n_features, hidden_dim, embed_dim)
            self.text = TextTower(
                len(vocabulary), len(vocabulary.pairs), hidden_dim, embed_dim
            )
        with torch.no_grad():
            self.image.layers[-1].bias.zero_()
            self.text.projection.bias.zero_()
        self.temperature = Temperature()

    def settings(self):
        return {
            "n_features": self.n_features,
            "embed_dim": self.embed_dim,
            "hidden_dim": self.hidden_dim,
            "seed": self.seed,
        }

    def params(self):
        """The flat parameter vector with named slices."""
        slices = OrderedDict()
        start = 0
        for name, parameter in self.named_parameters():
            slices[name] = (start, start + parameter.numel(), tuple(parameter.shape))
            start += parameter.numel()
        vector = torch.nn.utils.parameters_to_vector(self.parameters()).detach()
        return EncoderParams(vector.clone(), slices, self.seed)

    def embed_texts(self, texts, role=Role.TEXT):
        """Tokenize and encode strings."""
        return encode_texts(self, [tokenize(t, self.vocabulary) for t in texts], role)


def encode_images(model, inputs):
    """Encode a batch of images with a uniform shape."""
    if len(inputs) == 0:
        raise ValueError("Cannot encode an empty batch of images")
    shape = inputs[0].pixels.shape
    for item in inputs:
        if item.pixels.shape != shape:
            raise ValueError(
                f"Image '{item.identifier}' has shape {item.pixels.shape}, but the "
                f"batch has shape {shape}"
            )
    x = torch.from_numpy(np.stack([item.pixels.reshape(-1) for item in inputs]))
    if x.shape[1] != model.n_features:
        raise ValueError(
            f"Images have {x.shape[1]} values, the encoder expects {model.n_features}"
        )
    return EmbeddingBatch(model.image(x), Role.IMAGE)


def encode_texts(model, inputs, role=Role.TEXT):
    """Encode a batch of tokenized texts, tagging the rows with ``role``."""
    if len(inputs) == 0:
        raise ValueError("Cannot encode an empty batch of texts")
    n_words = len(model.vocabulary)
    n_pairs = len(model.vocabulary.pairs)
    sequences = []
    pair_sequences = []
    for item in inputs:
        if len(item.tokens) == 0:
            raise ValueError(f"Cannot encode the empty text '{item.raw}'")
        for token in item.tokens:
            if token < 0 or token >= n_words:
                raise ValueError(
                    f"Token id {token} in '{item.raw}' is outside the vocabulary of "
                    f"{n_words} words"
                )
        for pair in item.pairs:
            if pair < 0 or pair >= n_pairs:
                raise ValueError(
                    f"Pair id {pair} in '{item.raw}' is outside the vocabulary of "
                    f"{n_pairs} pairs"
                )
        sequences.append(list(item.tokens))
        pair_sequences.append(list(item.pairs))
    return EmbeddingBatch(model.text(sequences, pair_sequences), role)
