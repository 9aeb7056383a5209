"""Small fully-connected networks in float64 numpy.

Hidden layers are linear -> (optional layer norm) -> ReLU -> dropout; the
output layer is linear -> softmax, trained with cross-entropy SGD. Dropout
masks come from a counter-based generator keyed on (seed, step, layer), so
training is bit-reproducible and indifferent to save/restore segmentation.
"""

import json
import struct

import numpy as np

from ..errors import EmptyDataset, InvalidFraction, NonFiniteLoss, ShapeMismatch

_LN_EPS = 1e-5
_MAGIC = b"DLFW"
_FORMAT_VERSION = 1
_MASK64 = (1 << 64) - 1


def _stream(seed: int, step: int, tag: int) -> np.random.Generator:
    """Independent deterministic stream per (seed, step, tag)."""
    key = [seed & _MASK64, ((step & 0xFFFFFFFFFFFF) << 8) | (tag & 0xFF)]
    return np.random.Generator(np.random.Philox(key=key))


class Mlp:
    def __init__(self, dims, *, layer_norm=False, dropout=0.0, seed=0):
        if len(dims) < 2:
            raise ShapeMismatch("need at least input and output dims")
        if not 0.0 <= dropout < 1.0:
            raise InvalidFraction(f"dropout {dropout} outside [0, 1)")
        self.dims = list(int(d) for d in dims)
        self.layer_norm = bool(layer_norm)
        self.dropout = float(dropout)
        self.seed = int(seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        self.gains: list[np.ndarray] = []
        self.shifts: list[np.ndarray] = []
        self.prune_masks: list[np.ndarray] | None = None
        rng = np.random.Generator(np.random.Philox(key=[seed & _MASK64, 0]))
        for fan_in, fan_out in zip(self.dims, self.dims[1:]):
            scale = np.sqrt(2.0 / fan_in)
            self.weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        if self.layer_norm:
            for width in self.dims[1:-1]:
                self.gains.append(np.ones(width))
                self.shifts.append(np.zeros(width))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def weight_count(self) -> int:
        return sum(w.size for w in self.weights)

    def parameters(self):
        """(name, array) pairs of everything trainable."""
        out = []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out.append((f"w{i}", w))
            out.append((f"b{i}", b))
        for i, (g, s) in enumerate(zip(self.gains, self.shifts)):
            out.append((f"g{i}", g))
            out.append((f"s{i}", s))
        return out

    # -- forward / backward --

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dims[0]:
            raise ShapeMismatch(
                f"expected (batch, {self.dims[0]}), got {x.shape}"
            )
        return x

    def forward(self, x, *, train=False, step=0):
        """Class probabilities plus the cache needed for backprop."""
        x = self._check_input(x)
        cache = {"h": [x], "z": [], "xhat": [], "std": [], "mask": []}
        h = x
        for i in range(self.n_layers - 1):
            z = h @ self.weights[i] + self.biases[i]
            cache["z"].append(z)
            if self.layer_norm:
                mu = z.mean(axis=1, keepdims=True)
                var = z.var(axis=1, keepdims=True)
                std = np.sqrt(var + _LN_EPS)
                xhat = (z - mu) / std
                pre = xhat * self.gains[i] + self.shifts[i]
                cache["xhat"].append(xhat)
                cache["std"].append(std)
            else:
                pre = z
                cache["xhat"].append(None)
                cache["std"].append(None)
            a = np.maximum(pre, 0.0)
            if train and self.dropout > 0.0:
                keep = 1.0 - self.dropout
                mask = (
                    _stream(self.seed, step, i + 1).random(a.shape) < keep
                ).astype(np.float64)
                a = a * mask / keep
                cache["mask"].append(mask)
            else:
                cache["mask"].append(None)
            cache["h"].append(a)
            h = a
        logits = h @ self.weights[-1] + self.biases[-1]
        cache["logits"] = logits
        shifted = logits - logits.max(axis=1, keepdims=True)
        expz = np.exp(shifted)
        probs = expz / expz.sum(axis=1, keepdims=True)
        return probs, cache

    def loss_and_grads(self, x, y, *, train=False, step=0):
        y = np.asarray(y, dtype=np.int64)
        probs, cache = self.forward(x, train=train, step=step)
        batch = probs.shape[0]
        if y.shape != (batch,):
            raise ShapeMismatch(f"labels shape {y.shape} vs batch {batch}")
        logits = cache["logits"]
        lse = np.log(np.exp(logits - logits.max(axis=1, keepdims=True)).sum(axis=1))
        lse = lse + logits.max(axis=1)
        loss = float(np.mean(lse - logits[np.arange(batch), y]))
        if not np.isfinite(loss):
            raise NonFiniteLoss(f"loss {loss}")

        grads = {}
        dz = probs.copy()
        dz[np.arange(batch), y] -= 1.0
        dz /= batch
        # output layer
        grads[f"w{self.n_layers - 1}"] = cache["h"][-1].T @ dz
        grads[f"b{self.n_layers - 1}"] = dz.sum(axis=0)
        dh = dz @ self.weights[-1].T
        # hidden layers, back to front
        for i in range(self.n_layers - 2, -1, -1):
            mask = cache["mask"][i]
            if mask is not None:
                dh = dh * mask / (1.0 - self.dropout)
            if self.layer_norm:
                pre = cache["xhat"][i] * self.gains[i] + self.shifts[i]
            else:
                pre = cache["z"][i]
            da = dh * (pre > 0.0)
            if self.layer_norm:
                xhat = cache["xhat"][i]
                std = cache["std"][i]
                grads[f"g{i}"] = (da * xhat).sum(axis=0)
                grads[f"s{i}"] = da.sum(axis=0)
                dxhat = da * self.gains[i]
                dz_i = (
                    dxhat
                    - dxhat.mean(axis=1, keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)
                ) / std
            else:
                dz_i = da
            grads[f"w{i}"] = cache["h"][i].T @ dz_i
            grads[f"b{i}"] = dz_i.sum(axis=0)
            dh = dz_i @ self.weights[i].T
        return loss, grads

    def apply_grads(self, grads, learning_rate: float) -> None:
        for i in range(self.n_layers):
            self.weights[i] -= learning_rate * grads[f"w{i}"]
            self.biases[i] -= learning_rate * grads[f"b{i}"]
        for i in range(len(self.gains)):
            self.gains[i] -= learning_rate * grads[f"g{i}"]
            self.shifts[i] -= learning_rate * grads[f"s{i}"]
        if self.prune_masks is not None:
            for w, m in zip(self.weights, self.prune_masks):
                w *= m
        for name, value in self.parameters():
            if not np.all(np.isfinite(value)):
                raise NonFiniteLoss(f"parameter {name} went non-finite")

    # -- persistence --

    def serialize(self) -> bytes:
        header = {
            "dims": self.dims,
            "layer_norm": self.layer_norm,
            "dropout": self.dropout,
            "seed": self.seed,
            "pruned": self.prune_masks is not None,
        }
        head = json.dumps(header, sort_keys=True).encode("utf-8")
        chunks = [_MAGIC, struct.pack("<BI", _FORMAT_VERSION, len(head)), head]
        tensors = self.parameters()
        if self.prune_masks is not None:
            tensors = tensors + [
                (f"m{i}", m) for i, m in enumerate(self.prune_masks)
            ]
        chunks.append(struct.pack("<I", len(tensors)))
        for name, arr in tensors:
            name_b = name.encode("utf-8")
            chunks.append(struct.pack("<H", len(name_b)))
            chunks.append(name_b)
            chunks.append(struct.pack("<B", arr.ndim))
            chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return b"".join(chunks)

    @staticmethod
    def deserialize(raw: bytes) -> "Mlp":
        if raw[:4] != _MAGIC:
            raise ShapeMismatch("bad magic bytes in weight record")
        version, head_len = struct.unpack_from("<BI", raw, 4)
        if version != _FORMAT_VERSION:
            raise ShapeMismatch(f"unsupported weight format version {version}")
        offset = 9
        header = json.loads(raw[offset : offset + head_len].decode("utf-8"))
        offset += head_len
        (n_tensors,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        tensors = {}
        for _ in range(n_tensors):
            (name_len,) = struct.unpack_from("<H", raw, offset)
            offset += 2
            name = raw[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (ndim,) = struct.unpack_from("<B", raw, offset)
            offset += 1
            shape = struct.unpack_from(f"<{ndim}Q", raw, offset)
            offset += 8 * ndim
            count = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
            offset += 8 * count
            tensors[name] = arr.reshape(shape).copy()
        model = Mlp(
            header["dims"],
            layer_norm=header["layer_norm"],
            dropout=header["dropout"],
            seed=header["seed"],
        )
        for i in range(model.n_layers):
            model.weights[i] = tensors[f"w{i}"]
            model.biases[i] = tensors[f"b{i}"]
        for i in range(len(model.gains)):
            model.gains[i] = tensors[f"g{i}"]
            model.shifts[i] = tensors[f"s{i}"]
        if header["pruned"]:
            model.prune_masks = [
                tensors[f"m{i}"] for i in range(model.n_layers)
            ]
        return model


def train_step(model: Mlp, batch, learning_rate: float, step: int = 0) -> float:
    """One SGD update on cross-entropy; returns the pre-update batch loss."""
    x, y = batch
    loss, grads = model.loss_and_grads(x, y, train=True, step=step)
    model.apply_grads(grads, learning_rate)
    return loss


def evaluate(model: Mlp, dataset) -> dict[str, float]:
    """Accuracy and mean loss with dropout disabled. Argmax ties resolve to
    the lowest class id."""
    x, y = dataset
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape[0] == 0:
        raise EmptyDataset("evaluate on empty dataset")
    probs, cache = model.forward(x, train=False)
    logits = cache["logits"]
    lse = np.log(np.exp(logits - logits.max(axis=1, keepdims=True)).sum(axis=1))
    lse = lse + logits.max(axis=1)
    loss = float(np.mean(lse - logits[np.arange(x.shape[0]), y]))
    predictions = np.argmax(probs, axis=1)
    accuracy = float(np.mean(predictions == y))
    return {"accuracy": accuracy, "loss": loss}


def prune_magnitude(model: Mlp, fraction: float) -> Mlp:
    """Zero and freeze the globally smallest-magnitude weights.

    Exactly floor(fraction * weight_count) entries are zeroed; biases and
    normalization parameters are untouched. Frozen zeros survive later
    training steps.
    """
    if not 0.0 <= fraction < 1.0:
        raise InvalidFraction(f"fraction {fraction} outside [0, 1)")
    total = model.weight_count()
    k = int(fraction * total)
    masks = [np.ones_like(w) for w in model.weights]
    if k > 0:
        magnitudes = np.concatenate([np.abs(w).ravel() for w in model.weights])
        order = np.argsort(magnitudes, kind="stable")
        drop = order[:k]
        flat_masks = np.concatenate([m.ravel() for m in masks])
        flat_masks[drop] = 0.0
        offset = 0
        for i, w in enumerate(model.weights):
            masks[i] = flat_masks[offset : offset + w.size].reshape(w.shape)
            offset += w.size
    model.prune_masks = masks
    for w, m in zip(model.weights, masks):
        w *= m
    return model
