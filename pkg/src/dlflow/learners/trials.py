"""Built-in learners: a 5-linear-layer text classifier over stemmed count
vectors, and a flatten->hidden->softmax image classifier on 0-1 pixels."""

import json

import numpy as np

from .._util import keyed_hash_u64
from ..contract import DataSource, TrialContract
from ..errors import DataNotFound
from . import nn
from .synth import decode_image
from .text import LabelEncoding, Vocabulary, vectorize

_VAL_FRACTION = 0.2
_TWO64 = float(2**64)


def _holdout(paths: list[str], seed: int) -> tuple[list[int], list[int]]:
    """Stable per-path split of trial data into train and validation.

    Degenerate draws on tiny datasets are rebalanced deterministically so
    neither side is empty.
    """
    draws = [keyed_hash_u64(seed ^ 0x76616C, path) / _TWO64 for path in paths]
    train_idx = [i for i, u in enumerate(draws) if u >= _VAL_FRACTION]
    val_idx = [i for i, u in enumerate(draws) if u < _VAL_FRACTION]
    if len(paths) >= 2 and not val_idx:
        moved = min(range(len(draws)), key=lambda i: (draws[i], i))
        train_idx.remove(moved)
        val_idx.append(moved)
    if len(paths) >= 2 and not train_idx:
        moved = max(range(len(draws)), key=lambda i: (draws[i], i))
        val_idx.remove(moved)
        train_idx.append(moved)
    return train_idx, val_idx


class _MlpTrialBase(TrialContract):
    layer_norm = False
    default_hparams: dict = {}

    def __init__(self):
        self.hparams: dict = {}
        self.seed = 0
        self.model: nn.Mlp | None = None
        self.step = 0
        self._x_train = self._y_train = None
        self._x_val = self._y_val = None
        self.label_encoding: LabelEncoding | None = None

    def init(self, hparams: dict, seed: int) -> None:
        merged = dict(self.default_hparams)
        merged.update(hparams or {})
        self.hparams = merged
        self.seed = int(seed)
        self.step = 0

    # subclasses build self._x_* / self._y_* and the model
    def _build_model(self, input_dim: int, n_classes: int) -> nn.Mlp:
        raise NotImplementedError

    def train(self, budget: int) -> dict[str, float]:
        if self.model is None or self._x_train is None:
            raise DataNotFound("train called before load_data")
        batch_size = int(self.hparams["batch_size"])
        lr = float(self.hparams["learning_rate"])
        n = self._x_train.shape[0]
        losses = []
        for _ in range(int(budget)):
            rng = np.random.Generator(
                np.random.Philox(key=[self.seed & ((1 << 64) - 1), (self.step << 8) | 0xFE])
            )
            idx = rng.choice(n, size=min(batch_size, n), replace=False)
            loss = nn.train_step(
                self.model,
                (self._x_train[idx], self._y_train[idx]),
                lr,
                step=self.step,
            )
            losses.append(loss)
            self.step += 1
        return {"train_loss": float(np.mean(losses)) if losses else 0.0}

    def evaluate(self) -> dict[str, float]:
        if self.model is None or self._x_val is None:
            raise DataNotFound("evaluate called before load_data")
        metrics = nn.evaluate(self.model, (self._x_val, self._y_val))
        return {
            "validation_accuracy": metrics["accuracy"],
            "validation_loss": metrics["loss"],
        }

    def save(self) -> dict[str, bytes]:
        artifacts = {
            "weights": self.model.serialize(),
            "labels": self.label_encoding.to_bytes(),
            "state": json.dumps({"step": self.step}).encode("utf-8"),
        }
        return artifacts

    def restore(self, artifacts: dict[str, bytes]) -> None:
        self.model = nn.Mlp.deserialize(artifacts["weights"])
        self.label_encoding = LabelEncoding.from_bytes(artifacts["labels"])
        self.step = json.loads(artifacts["state"].decode("utf-8"))["step"]


class TextMlpTrial(_MlpTrialBase):
    """Five linear layers with layer normalization and dropout, fed by
    stemmed token counts against a training-set vocabulary."""

    layer_norm = True
    default_hparams = {
        "hidden_size": 64,
        "dropout": 0.1,
        "learning_rate": 0.05,
        "batch_size": 32,
        "vocab_size": 2000,
    }

    def __init__(self):
        super().__init__()
        self.vocabulary: Vocabulary | None = None
        self._docs: list[str] = []
        self._doc_labels: list[str] = []

    def load_data(self, data_source: DataSource, labels: list[tuple[str, str]]) -> None:
        if not labels:
            raise DataNotFound(f"no labels for {data_source.repo}@{data_source.ref}")
        paths = [p for p, _ in labels]
        self._docs = [data_source.read(p).decode("utf-8") for p in paths]
        self._doc_labels = [lab for _, lab in labels]
        train_idx, val_idx = _holdout(paths, data_source.seed)
        if not train_idx or not val_idx:
            raise DataNotFound("holdout split left an empty side")
        self.label_encoding = LabelEncoding.build(self._doc_labels)
        self.vocabulary = Vocabulary.build(
            [self._docs[i] for i in train_idx], int(self.hparams["vocab_size"])
        )
        self._vectorize_all(train_idx, val_idx)
        self.model = self._build_model(self.vocabulary.size, len(self.label_encoding.classes))

    def _vectorize_all(self, train_idx, val_idx) -> None:
        x = np.stack([vectorize(doc, self.vocabulary) for doc in self._docs])
        y = np.array(
            [self.label_encoding.encode(lab) for lab in self._doc_labels], dtype=np.int64
        )
        self._train_idx, self._val_idx = train_idx, val_idx
        self._x_train, self._y_train = x[train_idx], y[train_idx]
        self._x_val, self._y_val = x[val_idx], y[val_idx]

    def _build_model(self, input_dim: int, n_classes: int) -> nn.Mlp:
        h = int(self.hparams["hidden_size"])
        dims = [input_dim, h, h, h, h, n_classes]
        return nn.Mlp(
            dims,
            layer_norm=True,
            dropout=float(self.hparams["dropout"]),
            seed=self.seed,
        )

    def save(self) -> dict[str, bytes]:
        artifacts = super().save()
        artifacts["vocabulary"] = self.vocabulary.to_bytes()
        return artifacts

    def restore(self, artifacts: dict[str, bytes]) -> None:
        old_vocab = self.vocabulary.to_bytes() if self.vocabulary else None
        super().restore(artifacts)
        self.vocabulary = Vocabulary.from_bytes(artifacts["vocabulary"])
        if self._docs and old_vocab != artifacts["vocabulary"]:
            self._vectorize_all(self._train_idx, self._val_idx)

    def predict_scores(self, text: str) -> np.ndarray:
        vec = vectorize(text, self.vocabulary)[None, :]
        probs, _ = self.model.forward(vec, train=False)
        return probs[0]


class ImageMlpTrial(_MlpTrialBase):
    """Flat 784 input, one dense hidden layer, softmax over ten classes.
    Pixels are scaled from 0-255 to 0-1."""

    layer_norm = False
    default_hparams = {
        "hidden_size": 64,
        "dropout": 0.0,
        "learning_rate": 0.1,
        "batch_size": 32,
    }

    def load_data(self, data_source: DataSource, labels: list[tuple[str, str]]) -> None:
        if not labels:
            raise DataNotFound(f"no labels for {data_source.repo}@{data_source.ref}")
        paths = [p for p, _ in labels]
        matrices = [decode_image(data_source.read(p)) for p in paths]
        x = np.stack([m.astype(np.float64).ravel() / 255.0 for m in matrices])
        label_names = [lab for _, lab in labels]
        self.label_encoding = LabelEncoding.build(label_names)
        y = np.array([self.label_encoding.encode(lab) for lab in label_names], dtype=np.int64)
        train_idx, val_idx = _holdout(paths, data_source.seed)
        if not train_idx or not val_idx:
            raise DataNotFound("holdout split left an empty side")
        self._x_train, self._y_train = x[train_idx], y[train_idx]
        self._x_val, self._y_val = x[val_idx], y[val_idx]
        self.model = self._build_model(x.shape[1], len(self.label_encoding.classes))

    def _build_model(self, input_dim: int, n_classes: int) -> nn.Mlp:
        h = int(self.hparams["hidden_size"])
        return nn.Mlp(
            [input_dim, h, n_classes],
            layer_norm=False,
            dropout=float(self.hparams["dropout"]),
            seed=self.seed,
        )

    def predict_scores(self, matrix: np.ndarray) -> np.ndarray:
        x = np.asarray(matrix, dtype=np.float64).ravel()[None, :] / 255.0
        probs, _ = self.model.forward(x, train=False)
        return probs[0]
