"""Dense sigmoid networks with a categorical head, trained by plain SGD.

The head emits k-1 logits (log-odds against the implied last class) so the
network parameterization matches the categorical exponential family in
``dofnet.categorical`` exactly: the training loss is the soft-target
deviance, which is linear in the observation rows and therefore remains
well-defined when those rows are perturbed off the one-hot corners.

Everything here is deterministic given an ``RngStream``: weight
initialization, epoch shuffles, and the dropout/corruption masks of
denoising-autoencoder pre-training each consume a named substream, which is
what lets two fits that share a seed differ only through their targets.
No momentum, no adaptive step sizes, no early stopping.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .exceptions import TrainingError
from .validation import check_features, check_observation_matrix


@dataclass
class Layer:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)

    def copy(self):
        return Layer(self.W.copy(), self.b.copy())


@dataclass
class Network:
    """Hidden sigmoid layers followed by a linear head of k-1 logits."""

    layers: list
    k: int

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        if not self.layers:
            raise ValueError("network needs at least the head layer")
        for i, layer in enumerate(self.layers):
            if layer.W.ndim != 2 or layer.b.shape != (layer.W.shape[0],):
                raise ValueError(f"layer {i} has inconsistent shapes")
            if i > 0 and layer.W.shape[1] != self.layers[i - 1].W.shape[0]:
                raise ValueError(f"layer {i} input dim does not chain from layer {i - 1}")
        if self.layers[-1].W.shape[0] != self.k - 1:
            raise ValueError("head must have k-1 output units")

    @property
    def input_dim(self):
        return self.layers[0].W.shape[1]

    @property
    def hidden(self):
        return self.layers[:-1]

    @property
    def head(self):
        return self.layers[-1]

    @property
    def hidden_widths(self):
        return [layer.W.shape[0] for layer in self.hidden]

    def copy(self):
        return Network([layer.copy() for layer in self.layers], self.k)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 10
    batch_size: int = 32
    weight_decay_rate: float = 0.0
    dropout_rate: float = 0.0
    corruption_rate: float = 0.0
    pretrain_epochs: int = 0
    pretrain_learning_rate: float = 0.01

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0 or int(self.epochs) != self.epochs:
            raise ValueError("epochs must be a nonnegative integer")
        if self.batch_size < 1 or int(self.batch_size) != self.batch_size:
            raise ValueError("batch_size must be a positive integer")
        if self.weight_decay_rate < 0:
            raise ValueError("weight_decay_rate must be nonnegative")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if not 0.0 <= self.corruption_rate < 1.0:
            raise ValueError("corruption_rate must be in [0, 1)")
        if self.pretrain_epochs < 0 or int(self.pretrain_epochs) != self.pretrain_epochs:
            raise ValueError("pretrain_epochs must be a nonnegative integer")
        if self.pretrain_learning_rate <= 0:
            raise ValueError("pretrain_learning_rate must be positive")


def init_network(input_dim, hidden_widths, k, rng):
    """Fan-in scaled uniform init: W ~ U(+-sqrt(6/(fan_in+fan_out))), zero biases.

    All draws come from the ``init`` substream, layer by layer, so two
    networks built from the same seed are bit-identical.
    """
    if input_dim < 1 or k < 2 or any(w < 1 for w in hidden_widths):
        raise ValueError("dimensions must be positive and k >= 2")
    gen = rng.generator("init")
    layers = []
    fan_in = input_dim
    for width in list(hidden_widths) + [k - 1]:
        limit = np.sqrt(6.0 / (fan_in + width))
        W = gen.uniform(-limit, limit, size=(width, fan_in))
        layers.append(Layer(W, np.zeros(width)))
        fan_in = width
    return Network(layers, k)


def param_count(net):
    """Total number of weight and bias scalars, head counted in k-1 form."""
    return int(sum(layer.W.size + layer.b.size for layer in net.layers))


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise TrainingError(f"non-finite {what}")


def _hidden_pass(net, X, dropout_masks=None):
    """Activations through the hidden stack; returns (outputs, raw sigmoids).

    ``dropout_masks[i]`` is multiplied into hidden layer i's output (mask
    entries carry any inverted-dropout scaling already); ``None`` disables
    masking for that layer.
    """
    outs = [X]
    raws = []
    for i, layer in enumerate(net.hidden):
        Z = outs[-1] @ layer.W.T + layer.b
        _check_finite(Z, f"activations in hidden layer {i}")
        A = expit(Z)
        raws.append(A)
        if dropout_masks is not None and dropout_masks[i] is not None:
            A = A * dropout_masks[i]
        outs.append(A)
    return outs, raws


def _head_logits(net, hidden_out):
    theta = hidden_out @ net.head.W.T + net.head.b
    _check_finite(theta, "head logits")
    return theta


def _softmax_ext(theta):
    """Softmax over [theta, 0]: full k-column probabilities."""
    z = np.concatenate([theta, np.zeros((theta.shape[0], 1))], axis=1)
    z -= z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(net, X):
    """Class probabilities for each row of X; rows sum to 1. No masking."""
    X = check_features(X)
    if X.shape[1] != net.input_dim:
        raise ValueError(f"X has {X.shape[1]} features, network expects {net.input_dim}")
    outs, _ = _hidden_pass(net, X)
    return _softmax_ext(_head_logits(net, outs[-1]))


def loss_and_gradients(net, X, P, weight_decay_rate=0.0, dropout_masks=None):
    """Total soft-target deviance plus weight decay, and its backprop gradients.

    loss = sum_i -2[theta_i^T p_i - A(theta_i)] + weight_decay_rate * sum ||W||^2
    (biases carry no decay). Returns (loss, [(dW, db), ...]) matching
    ``net.layers``.
    """
    X = check_features(X)
    P = check_observation_matrix(P, k=net.k)
    if P.shape[0] != X.shape[0]:
        raise ValueError("X and P row counts differ")
    outs, raws = _hidden_pass(net, X, dropout_masks)
    theta = _head_logits(net, outs[-1])

    z = np.concatenate([theta, np.zeros((theta.shape[0], 1))], axis=1)
    m = z.max(axis=1, keepdims=True)
    A = (m + np.log(np.exp(z - m).sum(axis=1, keepdims=True)))[:, 0]
    mu_head = np.exp(theta - A[:, None])  # first k-1 class probabilities

    loss = -2.0 * float((theta * P).sum() - A.sum())
    if weight_decay_rate:
        loss += weight_decay_rate * sum(float((layer.W ** 2).sum()) for layer in net.layers)

    grads = [None] * len(net.layers)
    G = 2.0 * (mu_head - P)  # d loss / d theta
    dW = G.T @ outs[-1]
    if weight_decay_rate:
        dW += 2.0 * weight_decay_rate * net.head.W
    grads[-1] = (dW, G.sum(axis=0))

    upstream = G @ net.head.W
    for i in range(len(net.hidden) - 1, -1, -1):
        if dropout_masks is not None and dropout_masks[i] is not None:
            upstream = upstream * dropout_masks[i]
        delta = upstream * raws[i] * (1.0 - raws[i])
        dW = delta.T @ outs[i]
        if weight_decay_rate:
            dW += 2.0 * weight_decay_rate * net.hidden[i].W
        grads[i] = (dW, delta.sum(axis=0))
        if i > 0:
            upstream = delta @ net.hidden[i].W
    return loss, grads


def _sgd_step(layers, grads, scale):
    for layer, (dW, db) in zip(layers, grads):
        layer.W -= scale * dW
        layer.b -= scale * db
        if not (np.all(np.isfinite(layer.W)) and np.all(np.isfinite(layer.b))):
            raise TrainingError("non-finite parameters after update")


def train(net, X, P, config, rng):
    """Minibatch SGD on the soft-target deviance; returns a new Network.

    Per step the objective is the batch-mean deviance plus
    weight_decay_rate * sum ||W||^2. Shuffle order comes from the
    ``shuffle`` substream, so runs sharing a seed see identical minibatch
    splits. The input network is not modified.
    """
    net = net.copy()
    if config.epochs == 0:
        return net
    X = check_features(X)
    P = check_observation_matrix(P, k=net.k)
    n = X.shape[0]
    shuffle = rng.generator("shuffle")
    for epoch in range(config.epochs):
        order = shuffle.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            try:
                loss, grads = loss_and_gradients(
                    net, X[idx], P[idx],
                    weight_decay_rate=config.weight_decay_rate * idx.size,
                )
            except TrainingError as exc:
                raise TrainingError(f"epoch {epoch}: {exc}") from None
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            _sgd_step(net.layers, grads, config.learning_rate / idx.size)
    return net


def _reconstruction_step(H, idx, layer, c, binary, config, corr_gen, drop_gen):
    """One denoising-autoencoder SGD step on rows ``idx`` of the clean input H.

    Returns (dW, db, dc, loss) on batch-mean scale; tied decoder (W^T).
    """
    x = H[idx]
    B = x.shape[0]
    if config.corruption_rate > 0.0:
        keep = corr_gen.random(x.shape) >= config.corruption_rate
        x_noisy = x * keep
    else:
        x_noisy = x
    h = expit(x_noisy @ layer.W.T + layer.b)
    if config.dropout_rate > 0.0:
        mask = (drop_gen.random(h.shape) >= config.dropout_rate) / (1.0 - config.dropout_rate)
        h_kept = h * mask
    else:
        mask = None
        h_kept = h
    recon = h_kept @ layer.W + c
    if binary:
        recon = expit(recon)
        r = np.clip(recon, 1e-12, 1.0 - 1e-12)
        loss = -float((x * np.log(r) + (1.0 - x) * np.log(1.0 - r)).sum()) / B
    else:
        loss = 0.5 * float(((recon - x) ** 2).sum()) / B
    delta_out = recon - x  # exact for sigmoid+cross-entropy and for linear+squared error
    d_h = delta_out @ layer.W.T
    if mask is not None:
        d_h = d_h * mask
    delta_h = d_h * h * (1.0 - h)
    dW = (h_kept.T @ delta_out + delta_h.T @ x_noisy) / B
    if config.weight_decay_rate:
        dW += 2.0 * config.weight_decay_rate * layer.W
    return dW, delta_h.sum(axis=0) / B, delta_out.sum(axis=0) / B, loss


def pretrain_sda(net, X, config, rng):
    """Layer-wise denoising-autoencoder pre-training of the hidden stack.

    Each hidden layer is trained as a tied-weight autoencoder on the clean
    output of the layers below it: inputs are corrupted (zeroed with
    probability corruption_rate), hidden outputs are dropped out
    (inverted scaling), and the decoder reconstructs the uncorrupted
    input. Cross-entropy reconstruction when the layer's input lies in
    [0, 1], squared error otherwise. The head is untouched; the input
    network is not modified. Targets play no role here, so pre-training
    is identical across fits that share a seed.
    """
    if not net.hidden:
        raise ValueError("pre-training requires at least one hidden layer")
    net = net.copy()
    if config.pretrain_epochs == 0:
        return net
    X = check_features(X)
    n = X.shape[0]
    corr_gen = rng.generator("corruption")
    drop_gen = rng.generator("dropout")
    shuffle = rng.generator("pretrain-shuffle")
    H = X
    for li, layer in enumerate(net.hidden):
        binary = float(H.min()) >= 0.0 and float(H.max()) <= 1.0
        c = np.zeros(H.shape[1])
        for epoch in range(config.pretrain_epochs):
            order = shuffle.permutation(n)
            for start in range(0, n, config.batch_size):
                idx = order[start:start + config.batch_size]
                dW, db, dc, loss = _reconstruction_step(
                    H, idx, layer, c, binary, config, corr_gen, drop_gen)
                if not np.isfinite(loss):
                    raise TrainingError(f"non-finite reconstruction loss in layer {li}, epoch {epoch}")
                lr = config.pretrain_learning_rate
                layer.W -= lr * dW
                layer.b -= lr * db
                c -= lr * dc
                if not np.all(np.isfinite(layer.W)):
                    raise TrainingError(f"non-finite parameters in layer {li}, epoch {epoch}")
        H = expit(H @ layer.W.T + layer.b)
    return net


def save_network(net, path):
    """JSON shape header (one line), then all parameters as little-endian float64.

    Parameter order: for each layer from input to head, W row-major then b.
    """
    header = {"input_dim": net.input_dim, "hidden_widths": net.hidden_widths, "k": net.k}
    flat = np.concatenate([np.concatenate([layer.W.ravel(), layer.b]) for layer in net.layers])
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        f.write(flat.astype("<f8").tobytes())


def load_network(path):
    with open(path, "rb") as f:
        header = json.loads(f.readline().decode("utf-8"))
        blob = np.frombuffer(f.read(), dtype="<f8").astype(np.float64)
    widths = list(header["hidden_widths"]) + [header["k"] - 1]
    layers = []
    fan_in, pos = header["input_dim"], 0
    for width in widths:
        w_size = width * fan_in
        W = blob[pos:pos + w_size].reshape(width, fan_in).copy()
        pos += w_size
        b = blob[pos:pos + width].copy()
        pos += width
        layers.append(Layer(W, b))
        fan_in = width
    if pos != blob.size:
        raise ValueError(f"parameter blob has {blob.size} floats, expected {pos}")
    return Network(layers, header["k"])
