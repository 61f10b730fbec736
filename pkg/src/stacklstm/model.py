"""The stack-augmented LSTM recurrence.

A standard LSTM reads its recurrent input from the previous hidden state.
Here that recurrent input (the context) is routed through a stack keyed to
the bracket structure of the token stream:

- at an opening bracket, the pre-step hidden state is pushed, then the
  bracket token is consumed normally;
- at a closing bracket, the state saved at the matching opening bracket is
  popped and combined with the previous hidden state by one of three
  context functions (below); the combination becomes the recurrent input;
- at every other token the context is simply the previous hidden state,
  so bracket-free input degenerates to a vanilla LSTM exactly.

Context combination variants:

- "fc": tanh of a learned linear map over [popped | previous];
- "maxpool": elementwise max of the two (no parameters);
- "summarization": one auxiliary LSTM step that reads the previous hidden
  state as input and the popped state as its hidden state, reusing the
  layer's own weights. The auxiliary step consumes the running cell state
  and its output cell replaces the cell fed to the main step; this is the
  minimal consistent treatment of the cell and is called out in the
  decision log as an interpretation. Reusing the input weights forces
  embedding size == hidden size for this variant.

Only the hidden state is stacked; the cell state always evolves linearly
through block boundaries. With multiple layers each layer keeps its own
stack and applies the same discipline to its own hidden state.

Everything here runs batched: per-example stacks store (tensor, row)
references into the shared batch-sized hidden tensors, and closing-bracket
rows are spliced via gather/replace ops so the pop edge stays inside the
autodiff graph. The single-example functions are the same computation with
batch size 1.
"""

import math

import numpy as np

from . import tensor as T
from .errors import ConfigError, DimensionError, StructureError
from .rng import Rng
from .tensor import Tensor
from .trees import KIND_CLOSE, KIND_OPEN, KIND_PAD
from .vocab import KIND_CODES

ALPHA_FC = "fc"
ALPHA_MAXPOOL = "maxpool"
ALPHA_SUMMARIZATION = "summarization"
ALPHAS = (ALPHA_FC, ALPHA_MAXPOOL, ALPHA_SUMMARIZATION)

MODES = ("strict", "lenient")

_OPEN_CODE = KIND_CODES[KIND_OPEN]
_CLOSE_CODE = KIND_CODES[KIND_CLOSE]
_PAD_CODE = KIND_CODES[KIND_PAD]


def init_matrix(rng, rows, cols, name):
    r = math.sqrt(6.0 / (rows + cols))
    return Tensor(rng.uniform_array((rows, cols), -r, r), name=name)


def init_bias(n, name):
    return Tensor(np.zeros(n), name=name)


class LstmLayerParams:
    """Gate parameters of one layer: per gate an input projection (hidden x
    input), a recurrent projection (hidden x hidden), and a bias."""

    GATES = ("f", "i", "o", "c")

    def __init__(self, input_size, hidden_size, rng, prefix):
        if input_size < 1 or hidden_size < 1:
            raise ConfigError("layer sizes must be positive")
        self.input_size = input_size
        self.hidden_size = hidden_size
        for gate in self.GATES:
            setattr(self, "W_" + gate, init_matrix(rng, hidden_size, input_size, "%s.W_%s" % (prefix, gate)))
            setattr(self, "U_" + gate, init_matrix(rng, hidden_size, hidden_size, "%s.U_%s" % (prefix, gate)))
            setattr(self, "b_" + gate, init_bias(hidden_size, "%s.b_%s" % (prefix, gate)))

    def tensors(self):
        out = []
        for gate in self.GATES:
            out += [getattr(self, "W_" + gate), getattr(self, "U_" + gate), getattr(self, "b_" + gate)]
        return out


class AlphaParams:
    """Context-combination parameters. Only the fc variant owns tensors;
    summarization borrows the layer's LSTM parameters."""

    def __init__(self, variant, hidden_size, rng=None, prefix="", layer=None):
        if variant not in ALPHAS:
            raise ConfigError("unknown context variant %r (choose from %s)" % (variant, ", ".join(ALPHAS)))
        self.variant = variant
        self.hidden_size = hidden_size
        self.W = None
        self.b = None
        self.layer = None
        if variant == ALPHA_FC:
            self.W = init_matrix(rng, hidden_size, 2 * hidden_size, prefix + ".alpha_W")
            self.b = init_bias(hidden_size, prefix + ".alpha_b")
        elif variant == ALPHA_SUMMARIZATION:
            if layer is None:
                raise ConfigError("summarization variant needs the layer's parameters")
            if layer.input_size != layer.hidden_size:
                raise ConfigError(
                    "summarization context reuses the layer input weights, so the layer "
                    "input size (%d) must equal the hidden size (%d); set embedding_size "
                    "equal to hidden_size" % (layer.input_size, layer.hidden_size)
                )
            self.layer = layer

    def tensors(self):
        if self.variant == ALPHA_FC:
            return [self.W, self.b]
        return []


def lstm_step(x, h_prev, c_prev, params):
    """One gate update on a (batch, *) slab. Returns (h, c)."""
    if x.data.ndim != 2 or x.shape[1] != params.input_size:
        raise DimensionError(
            "lstm_step: input shape %s does not match input size %d" % (x.shape, params.input_size)
        )
    if h_prev.shape != (x.shape[0], params.hidden_size) or c_prev.shape != h_prev.shape:
        raise DimensionError(
            "lstm_step: state shapes %s/%s do not match (%d, %d)"
            % (h_prev.shape, c_prev.shape, x.shape[0], params.hidden_size)
        )
    f = T.sigmoid(_affine(x, params.W_f, h_prev, params.U_f, params.b_f))
    i = T.sigmoid(_affine(x, params.W_i, h_prev, params.U_i, params.b_i))
    o = T.sigmoid(_affine(x, params.W_o, h_prev, params.U_o, params.b_o))
    g = T.tanh(_affine(x, params.W_c, h_prev, params.U_c, params.b_c))
    c = T.add(T.mul(f, c_prev), T.mul(i, g))
    h = T.mul(o, T.tanh(c))
    return h, c


def _affine(x, W, h, U, b):
    return T.add_rowvec(T.add(T.matmul(x, W, tb=True), T.matmul(h, U, tb=True)), b)


def _alpha_with_cell(h_begin, h_prev, params, c_prev):
    """Combined context plus the cell to feed the main step."""
    if h_begin.shape != h_prev.shape:
        raise DimensionError(
            "alpha_combine: state shapes differ, %s vs %s" % (h_begin.shape, h_prev.shape)
        )
    if h_begin.shape[1] != params.hidden_size:
        raise DimensionError(
            "alpha_combine: state width %d does not match hidden size %d"
            % (h_begin.shape[1], params.hidden_size)
        )
    if params.variant == ALPHA_MAXPOOL:
        return T.maximum(h_begin, h_prev), c_prev
    if params.variant == ALPHA_FC:
        z = T.matmul(T.concat_cols(h_begin, h_prev), params.W, tb=True)
        return T.tanh(T.add_rowvec(z, params.b)), c_prev
    h_ctx, c_aux = lstm_step(h_prev, h_begin, c_prev, params.layer)
    return h_ctx, c_aux


def alpha_combine(h_begin, h_prev, params, c_prev=None):
    """Combine the popped state with the previous state into the context.

    For the summarization variant the auxiliary step consumes a cell
    state; pass the running cell (as salstm_step does) or zeros are used.
    """
    if c_prev is None:
        c_prev = Tensor(np.zeros_like(h_begin.data), requires_grad=False)
    h_ctx, _ = _alpha_with_cell(h_begin, h_prev, params, c_prev)
    return h_ctx


class StackState:
    """Per-example, per-layer stack of saved hidden states, with an event
    log of (op, timestep) tuples for tests. Timesteps are 1-based."""

    __slots__ = ("frames", "op_log", "t")

    def __init__(self):
        self.frames = []
        self.op_log = []
        self.t = 0

    @property
    def depth(self):
        return len(self.frames)

    def push(self, ref, t):
        self.frames.append(ref)
        self.op_log.append(("PUSH", t))

    def pop(self, t):
        self.op_log.append(("POP", t))
        return self.frames.pop()

    def underflow(self, t):
        self.op_log.append(("UNDERFLOW", t))


def _frame_tensor(frame):
    tensor, row = frame
    if tensor.shape[0] == 1 and row == 0:
        return tensor
    return T.take_row(tensor, row)


def salstm_step(kind, x_t, h_prev, c_prev, stack, params, alpha_params, mode="strict"):
    """One stack-augmented step on a single example (row tensors of shape
    (1, hidden)). kind is the position's kind tag string. Returns
    (h_t, c_t, stack); the stack is advanced in place and returned."""
    if mode not in MODES:
        raise ConfigError("unknown mode %r" % mode)
    stack.t += 1
    t = stack.t
    h_ctx, c_eff = h_prev, c_prev
    if kind == KIND_OPEN:
        stack.push((h_prev, 0), t)
    elif kind == KIND_CLOSE:
        if stack.depth == 0:
            if mode == "strict":
                raise StructureError("position %d: closing bracket with an empty stack" % t)
            stack.underflow(t)
        else:
            h_begin = _frame_tensor(stack.pop(t))
            h_ctx, c_eff = _alpha_with_cell(h_begin, h_prev, alpha_params, c_prev)
    h, c = lstm_step(x_t, h_ctx, c_eff, params)
    return h, c, stack


class RunTrace:
    """Per-timestep states of one example: h[layer][t] and c[layer][t] are
    (1, hidden) tensors over the unpadded prefix."""

    __slots__ = ("h", "c", "stacks", "kinds", "length")

    def __init__(self, h, c, stacks, kinds, length):
        self.h = h
        self.c = c
        self.stacks = stacks
        self.kinds = kinds
        self.length = length

    def final_hidden(self):
        if self.length == 0:
            raise DimensionError("empty trace has no final hidden state")
        return self.h[-1][self.length - 1]


class BatchTrace:
    """Batched run: h_top[t] is the top layer's (batch, hidden) state; when
    recorded, h_layers[t][l] / c_layers[t][l] hold every layer. stacks[b][l]
    is example b's stack for layer l."""

    __slots__ = ("h_top", "h_layers", "c_layers", "stacks", "lengths", "ids", "kinds", "length")

    def __init__(self, h_top, h_layers, c_layers, stacks, lengths, ids, kinds):
        self.h_top = h_top
        self.h_layers = h_layers
        self.c_layers = c_layers
        self.stacks = stacks
        self.lengths = lengths
        self.ids = ids
        self.kinds = kinds
        self.length = len(h_top)


class StackLSTM:
    """Embedding plus a stack of stack-augmented LSTM layers.

    vanilla=True turns off all stack handling: brackets become ordinary
    tokens and the model is a plain LSTM over the same stream (the ablation
    baseline). Parameters are drawn in a fixed order from the seed, so a
    (config, seed) pair always yields identical weights.
    """

    def __init__(self, vocab_size, hidden_size, embedding_size=None, layers=2,
                 alpha=ALPHA_SUMMARIZATION, vanilla=False, seed=0):
        if vocab_size < 5:
            raise ConfigError("vocab_size must cover the four reserved ids")
        if hidden_size < 1 or layers < 1:
            raise ConfigError("hidden_size and layers must be positive")
        embedding_size = hidden_size if embedding_size is None else embedding_size
        if embedding_size < 1:
            raise ConfigError("embedding_size must be positive")
        self.vocab_size = vocab_size
        self.hidden_size = hidden_size
        self.embedding_size = embedding_size
        self.num_layers = layers
        self.alpha = alpha
        self.vanilla = bool(vanilla)
        rng = Rng(seed)
        self.embed = init_matrix(rng, vocab_size, embedding_size, "embed")
        self.layers = []
        self.alphas = []
        for l in range(layers):
            in_size = embedding_size if l == 0 else hidden_size
            layer = LstmLayerParams(in_size, hidden_size, rng, "layer%d" % l)
            self.layers.append(layer)
        for l, layer in enumerate(self.layers):
            self.alphas.append(
                AlphaParams(alpha, hidden_size, rng=rng, prefix="layer%d" % l, layer=layer)
            )

    def parameters(self):
        out = [self.embed]
        for layer, alpha in zip(self.layers, self.alphas):
            out += layer.tensors()
            out += alpha.tensors()
        return out

    def _zero_state(self, batch):
        return Tensor(np.zeros((batch, self.hidden_size)), requires_grad=False)

    def run_batch(self, batch, mode, record_layers=False):
        """Run a batch of EncodedSequence objects (equal array lengths).

        PAD rows are frozen: their h/c carry forward unchanged and no
        stack events fire for them, so batching never changes a result.
        """
        if mode not in MODES:
            raise ConfigError("unknown mode %r" % mode)
        if not batch:
            raise ConfigError("empty batch")
        width = batch[0].ids.shape[0]
        for e in batch:
            if e.ids.shape[0] != width:
                raise ConfigError("all sequences in a batch must be encoded to one length")
        ids = np.stack([e.ids for e in batch])
        kinds = np.stack([e.kinds for e in batch])
        lengths = np.array([e.length for e in batch], dtype=np.int64)
        for b, e in enumerate(batch):
            if np.any(kinds[b, : e.length] == _PAD_CODE):
                raise ConfigError("PAD positions must sit at the sequence tail")
        n = len(batch)
        t_max = int(lengths.max()) if n else 0

        stacks = [[StackState() for _ in range(self.num_layers)] for _ in range(n)]
        h = [self._zero_state(n) for _ in range(self.num_layers)]
        c = [self._zero_state(n) for _ in range(self.num_layers)]
        h_top = []
        h_layers = []
        c_layers = []
        for t in range(t_max):
            active = lengths > t
            x = T.embedding(self.embed, ids[:, t])
            col = kinds[:, t]
            for l in range(self.num_layers):
                h_ctx, c_eff = h[l], c[l]
                if not self.vanilla:
                    open_rows = np.nonzero((col == _OPEN_CODE) & active)[0]
                    for b in open_rows:
                        st = stacks[b][l]
                        st.t = t + 1
                        st.push((h[l], int(b)), t + 1)
                    close_rows = [int(b) for b in np.nonzero((col == _CLOSE_CODE) & active)[0]]
                    popped = []
                    kept = []
                    for b in close_rows:
                        st = stacks[b][l]
                        st.t = t + 1
                        if st.depth == 0:
                            if mode == "strict":
                                raise StructureError(
                                    "position %d: closing bracket with an empty stack" % (t + 1)
                                )
                            st.underflow(t + 1)
                        else:
                            popped.append(_frame_tensor(st.pop(t + 1)))
                            kept.append(b)
                    if kept:
                        idx = np.array(kept, dtype=np.int64)
                        h_begin = T.concat_rows(popped)
                        h_prev_sub = T.gather_rows(h[l], idx)
                        c_prev_sub = T.gather_rows(c[l], idx)
                        ctx_sub, cell_sub = _alpha_with_cell(
                            h_begin, h_prev_sub, self.alphas[l], c_prev_sub
                        )
                        h_ctx = T.set_rows(h[l], idx, ctx_sub)
                        if cell_sub is not c_prev_sub:
                            c_eff = T.set_rows(c[l], idx, cell_sub)
                h_new, c_new = lstm_step(x, h_ctx, c_eff, self.layers[l])
                if np.all(active):
                    h[l], c[l] = h_new, c_new
                else:
                    m = active.astype(np.float64)
                    h[l] = T.blend_rows(h_new, h[l], m)
                    c[l] = T.blend_rows(c_new, c[l], m)
                x = h[l]
            h_top.append(h[self.num_layers - 1])
            if record_layers:
                h_layers.append(list(h))
                c_layers.append(list(c))
        if mode == "strict" and not self.vanilla:
            for b in range(n):
                for st in stacks[b]:
                    if st.depth:
                        raise StructureError(
                            "example %d: sequence ended with %d unclosed brackets"
                            % (b, st.depth)
                        )
        return BatchTrace(h_top, h_layers, c_layers, stacks, lengths, ids, kinds)

    def run_sequence(self, encoded, mode="strict"):
        """Trace one example; strict mode also demands a balanced sequence
        (every opening bracket closed by the end)."""
        bt = self.run_batch([encoded], mode, record_layers=True)
        length = int(bt.lengths[0])
        h = [[bt.h_layers[t][l] for t in range(length)] for l in range(self.num_layers)]
        c = [[bt.c_layers[t][l] for t in range(length)] for l in range(self.num_layers)]
        stacks = [bt.stacks[0][l] for l in range(self.num_layers)]
        kind_names = {v: k for k, v in KIND_CODES.items()}
        kinds = [kind_names[int(k)] for k in bt.kinds[0, :length]]
        return RunTrace(h, c, stacks, kinds, length)
