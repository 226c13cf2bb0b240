"""
Dense tensors with define-by-run reverse-mode differentiation.

Every mathematical step of the model is one of the primitives registered in
``PRIMITIVES``. While a ``Tape`` is active, each primitive application whose
inputs track gradients is appended to the tape; ``Tape.backward`` replays the
record in reverse order and hands every recorded leaf its gradient.
"""
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from adaptation.exceptions import DomainError, ShapeError, TapeError

_DEFAULT_DTYPE = np.float64
_local = threading.local()

Number = Union[int, float]


def set_default_dtype(dtype) -> None:
    """Switch between 64-bit (verification) and 32-bit (training) storage."""
    global _DEFAULT_DTYPE
    if dtype in (64, 'float64', np.float64):
        _DEFAULT_DTYPE = np.float64
    elif dtype in (32, 'float32', np.float32):
        _DEFAULT_DTYPE = np.float32
    else:
        raise ValueError(f"Unsupported precision: {dtype!r}")


def get_default_dtype():
    return _DEFAULT_DTYPE


# =============================================================================
# TENSOR
# =============================================================================

class Tensor:
    """A dense float array with a gradient slot and a link into the active tape."""

    __slots__ = ('data', 'grad', 'requires_grad', 'node_id', 'name')

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None, dtype=None):
        self.data = np.array(data, dtype=dtype or _DEFAULT_DTYPE)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.node_id: Optional[int] = None
        self.name = name

    @classmethod
    def _wrap(cls, array: np.ndarray) -> 'Tensor':
        tensor = cls.__new__(cls)
        tensor.data = array
        tensor.grad = None
        tensor.requires_grad = False
        tensor.node_id = None
        tensor.name = None
        return tensor

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> 'Tensor':
        return Tensor._wrap(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ''
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # ---------- operators ----------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return add(self, -float(other))
        return add(self, scalar_mul(other, -1.0))

    def __rsub__(self, other):
        return add(scalar_mul(self, -1.0), other)

    def __neg__(self):
        return scalar_mul(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scalar_mul(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, (int, float)):
            raise TypeError("Tensors only divide by scalars")
        return scalar_mul(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    # ---------- method forms ----------

    def sigmoid(self):
        return sigmoid(self)

    def tanh(self):
        return tanh(self)

    def relu(self):
        return relu(self)

    def log(self):
        return ln(self)

    def softmax(self, axis: int = -1):
        return softmax(self, axis=axis)

    def sum(self, axis=None, keepdims: bool = False):
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return reduce_mean(self, axis=axis, keepdims=keepdims)

    def backward(self) -> Dict[int, np.ndarray]:
        return backward(self)


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def parameter(data, name: Optional[str] = None) -> Tensor:
    """A trainable leaf."""
    return Tensor(data, requires_grad=True, name=name)


# =============================================================================
# TAPE
# =============================================================================

@dataclass
class TapeRecord:
    primitive: 'Primitive'
    inputs: Tuple[Optional[int], ...]
    output: int
    arrays: Tuple[np.ndarray, ...]
    saved: Any
    attrs: Dict[str, Any]


class Tape:
    """
    Ordered record of primitive applications for one loss graph.

    Node ids are tape-local and assigned in creation order, so every input id
    precedes the record that consumes it.
    """

    def __init__(self):
        self.records: List[TapeRecord] = []
        self._nodes: Dict[int, Tensor] = {}
        self._ids: Dict[int, int] = {}
        self._leaves: List[int] = []

    def __enter__(self) -> 'Tape':
        _stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _stack().pop()

    def __len__(self) -> int:
        return len(self.records)

    def node_of(self, tensor: Tensor) -> Optional[int]:
        return self._ids.get(id(tensor))

    def watch(self, *tensors: Tensor) -> None:
        """Register leaves up front so they receive zero gradients when unused."""
        for tensor in tensors:
            if tensor.requires_grad and id(tensor) not in self._ids:
                self._register(tensor, leaf=True)

    def _register(self, tensor: Tensor, leaf: bool) -> int:
        node = len(self._nodes)
        self._nodes[node] = tensor
        self._ids[id(tensor)] = node
        tensor.node_id = node
        if leaf:
            self._leaves.append(node)
        return node

    def record(self, primitive, tensors, output, saved, attrs) -> None:
        inputs = []
        for tensor in tensors:
            if not tensor.requires_grad:
                inputs.append(None)
                continue
            node = self._ids.get(id(tensor))
            if node is None:
                # Tracked tensors not created on this tape enter as leaves.
                node = self._register(tensor, leaf=True)
            inputs.append(node)
        output.requires_grad = True
        out_node = self._register(output, leaf=False)
        self.records.append(TapeRecord(
            primitive=primitive,
            inputs=tuple(inputs),
            output=out_node,
            arrays=tuple(t.data for t in tensors),
            saved=saved,
            attrs=attrs,
        ))

    def backward(self, loss: Tensor) -> Dict[int, np.ndarray]:
        """Propagate d(loss)/d(node) back to every recorded leaf."""
        if loss.data.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        root = self._ids.get(id(loss))
        if root is None:
            raise TapeError("The loss was not produced under this tape")

        grads: Dict[int, np.ndarray] = {root: np.ones_like(loss.data)}
        for rec in reversed(self.records):
            grad = grads.pop(rec.output, None)
            if grad is None:
                continue
            input_grads = rec.primitive.backward(grad, rec.saved, rec.arrays, **rec.attrs)
            for node, input_grad in zip(rec.inputs, input_grads):
                if node is None or input_grad is None:
                    continue
                if node in grads:
                    grads[node] = grads[node] + input_grad
                else:
                    grads[node] = input_grad

        result: Dict[int, np.ndarray] = {}
        for node in self._leaves:
            tensor = self._nodes[node]
            grad = grads.get(node)
            if grad is None:
                grad = np.zeros_like(tensor.data)
            tensor.grad = grad
            result[node] = grad
        return result


def _stack() -> List[Optional[Tape]]:
    if not hasattr(_local, 'tapes'):
        _local.tapes = []
    return _local.tapes


def active_tape() -> Optional[Tape]:
    stack = _stack()
    return stack[-1] if stack else None


@contextmanager
def no_grad() -> Iterator[None]:
    """Suspend recording, including inside an enclosing tape."""
    stack = _stack()
    stack.append(None)
    try:
        yield
    finally:
        stack.pop()


def backward(loss: Tensor) -> Dict[int, np.ndarray]:
    tape = active_tape()
    if tape is None:
        raise TapeError("backward requires an active tape")
    return tape.backward(loss)


# =============================================================================
# PRIMITIVES
# =============================================================================

def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(kind: str, a: np.ndarray, b: np.ndarray) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{kind}: shapes {a.shape} and {b.shape} do not conform") from None


class Primitive:
    kind = ''
    arity: Optional[int] = 1

    def check(self, *arrays: np.ndarray, **attrs) -> None:
        pass

    def forward(self, *arrays: np.ndarray, **attrs) -> Tuple[np.ndarray, Any]:
        raise NotImplementedError

    def backward(self, grad, saved, arrays, **attrs) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError


class MatMul(Primitive):
    kind = 'matmul'
    arity = 2

    def check(self, a, b, **attrs):
        if a.ndim not in (1, 2) or b.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
            raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform")

    def forward(self, a, b):
        return a @ b, None

    def backward(self, grad, saved, arrays):
        a, b = arrays
        a2 = a if a.ndim == 2 else a[None, :]
        b2 = b if b.ndim == 2 else b[:, None]
        g2 = grad.reshape(a2.shape[0], b2.shape[1])
        return (g2 @ b2.T).reshape(a.shape), (a2.T @ g2).reshape(b.shape)


class Add(Primitive):
    kind = 'add'
    arity = 2

    def check(self, a, b, **attrs):
        _broadcast_shape(self.kind, a, b)

    def forward(self, a, b):
        return a + b, None

    def backward(self, grad, saved, arrays):
        a, b = arrays
        return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)


class Mul(Primitive):
    kind = 'elementwise-mul'
    arity = 2

    def check(self, a, b, **attrs):
        _broadcast_shape(self.kind, a, b)

    def forward(self, a, b):
        return a * b, None

    def backward(self, grad, saved, arrays):
        a, b = arrays
        return _unbroadcast(grad * b, a.shape), _unbroadcast(grad * a, b.shape)


class Concat(Primitive):
    kind = 'concat'
    arity = None

    def check(self, *arrays, axis=-1):
        if not arrays:
            raise ShapeError("concat: needs at least one input")
        first = arrays[0]
        ax = axis % first.ndim if first.ndim else 0
        for other in arrays[1:]:
            if other.ndim != first.ndim or any(
                    x != y for i, (x, y) in enumerate(zip(first.shape, other.shape)) if i != ax):
                raise ShapeError(f"concat: shapes {first.shape} and {other.shape} do not conform")

    def forward(self, *arrays, axis=-1):
        return np.concatenate(arrays, axis=axis), None

    def backward(self, grad, saved, arrays, axis=-1):
        bounds = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        return tuple(np.split(grad, bounds, axis=axis))


class Sigmoid(Primitive):
    kind = 'sigmoid'

    def forward(self, x):
        out = 0.5 * (1.0 + np.tanh(0.5 * x))
        return out, out

    def backward(self, grad, out, arrays):
        return (grad * out * (1.0 - out),)


class Tanh(Primitive):
    kind = 'tanh'

    def forward(self, x):
        out = np.tanh(x)
        return out, out

    def backward(self, grad, out, arrays):
        return (grad * (1.0 - out * out),)


class Relu(Primitive):
    kind = 'relu'

    def forward(self, x):
        return np.maximum(x, 0.0), None

    def backward(self, grad, saved, arrays):
        return (grad * (arrays[0] > 0.0),)


class Ln(Primitive):
    kind = 'ln'

    def check(self, x, **attrs):
        if np.any(x <= 0.0):
            raise DomainError(f"ln: input has non-positive value {float(np.min(x))!r}")

    def forward(self, x):
        return np.log(x), None

    def backward(self, grad, saved, arrays):
        return (grad / arrays[0],)


class Clamp(Primitive):
    kind = 'clamp'

    def forward(self, x, minimum=0.0):
        return np.maximum(x, minimum), None

    def backward(self, grad, saved, arrays, minimum=0.0):
        return (grad * (arrays[0] >= minimum),)


class Softmax(Primitive):
    kind = 'softmax'

    def forward(self, x, axis=-1):
        shifted = np.exp(x - np.max(x, axis=axis, keepdims=True))
        out = shifted / np.sum(shifted, axis=axis, keepdims=True)
        return out, out

    def backward(self, grad, out, arrays, axis=-1):
        inner = np.sum(grad * out, axis=axis, keepdims=True)
        return (out * (grad - inner),)


class Mean(Primitive):
    kind = 'mean'

    def forward(self, x, axis=None, keepdims=False):
        return np.mean(x, axis=axis, keepdims=keepdims), None

    def backward(self, grad, saved, arrays, axis=None, keepdims=False):
        x = arrays[0]
        count = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, x.shape) / count,)


class Sum(Primitive):
    kind = 'sum'

    def forward(self, x, axis=None, keepdims=False):
        return np.sum(x, axis=axis, keepdims=keepdims), None

    def backward(self, grad, saved, arrays, axis=None, keepdims=False):
        x = arrays[0]
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, x.shape).copy(),)


class ScalarMul(Primitive):
    kind = 'scalar-mul'

    def forward(self, x, scale=1.0):
        return x * scale, None

    def backward(self, grad, saved, arrays, scale=1.0):
        return (grad * scale,)


class ReverseGradient(Primitive):
    kind = 'reverse-gradient'

    def forward(self, x, scale=1.0):
        return x.copy(), None

    def backward(self, grad, saved, arrays, scale=1.0):
        return (grad * -scale,)


class Transpose(Primitive):
    kind = 'transpose'

    def check(self, x, **attrs):
        if x.ndim != 2:
            raise ShapeError(f"transpose: expects a matrix, got shape {x.shape}")

    def forward(self, x):
        return x.T.copy(), None

    def backward(self, grad, saved, arrays):
        return (grad.T,)


class Slice(Primitive):
    kind = 'slice'

    def check(self, x, axis=0, start=0, stop=None):
        size = x.shape[axis]
        stop = size if stop is None else stop
        if not 0 <= start < stop <= size:
            raise ShapeError(f"slice: [{start}:{stop}] outside axis {axis} of shape {x.shape}")

    def forward(self, x, axis=0, start=0, stop=None):
        index = [slice(None)] * x.ndim
        index[axis] = slice(start, stop)
        return x[tuple(index)].copy(), None

    def backward(self, grad, saved, arrays, axis=0, start=0, stop=None):
        x = arrays[0]
        out = np.zeros_like(x)
        index = [slice(None)] * x.ndim
        index[axis] = slice(start, stop)
        out[tuple(index)] = grad
        return (out,)


class Reshape(Primitive):
    kind = 'reshape'

    def check(self, x, shape=()):
        if int(np.prod(shape)) != x.size:
            raise ShapeError(f"reshape: cannot view shape {x.shape} as {tuple(shape)}")

    def forward(self, x, shape=()):
        return x.reshape(shape), None

    def backward(self, grad, saved, arrays, shape=()):
        return (grad.reshape(arrays[0].shape),)


class Gather(Primitive):
    kind = 'gather'

    def check(self, x, indices=()):
        idx = np.asarray(indices)
        if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
            raise ShapeError(f"gather: row index out of range for shape {x.shape}")

    def forward(self, x, indices=()):
        return x[np.asarray(indices, dtype=np.int64)], None

    def backward(self, grad, saved, arrays, indices=()):
        out = np.zeros_like(arrays[0])
        np.add.at(out, np.asarray(indices, dtype=np.int64), grad)
        return (out,)


PRIMITIVES: Dict[str, Primitive] = {
    prim.kind: prim for prim in (
        MatMul(), Add(), Mul(), Concat(), Sigmoid(), Tanh(), Relu(), Ln(), Clamp(),
        Softmax(), Mean(), Sum(), ScalarMul(), ReverseGradient(), Transpose(),
        Slice(), Reshape(), Gather(),
    )
}


def forward_primitive(kind: str, *inputs, **attrs) -> Tensor:
    """Apply a registered primitive and record it on the active tape."""
    try:
        prim = PRIMITIVES[kind]
    except KeyError:
        raise ValueError(f"Unknown primitive '{kind}'") from None
    if prim.arity is not None and len(inputs) != prim.arity:
        raise ShapeError(f"{kind}: expects {prim.arity} input(s), got {len(inputs)}")

    tensors = tuple(as_tensor(value) for value in inputs)
    arrays = tuple(t.data for t in tensors)
    prim.check(*arrays, **attrs)
    out, saved = prim.forward(*arrays, **attrs)
    result = Tensor._wrap(np.asarray(out, dtype=arrays[0].dtype if arrays else _DEFAULT_DTYPE))

    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in tensors):
        tape.record(prim, tensors, result, saved, attrs)
    return result


# ---------- functional forms ----------

def matmul(a, b) -> Tensor:
    return forward_primitive('matmul', a, b)


def add(a, b) -> Tensor:
    return forward_primitive('add', a, b)


def mul(a, b) -> Tensor:
    return forward_primitive('elementwise-mul', a, b)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    return forward_primitive('concat', *tensors, axis=axis)


def sigmoid(x) -> Tensor:
    return forward_primitive('sigmoid', x)


def tanh(x) -> Tensor:
    return forward_primitive('tanh', x)


def relu(x) -> Tensor:
    return forward_primitive('relu', x)


def ln(x) -> Tensor:
    return forward_primitive('ln', x)


def clamp(x, minimum: float) -> Tensor:
    return forward_primitive('clamp', x, minimum=minimum)


def softmax(x, axis: int = -1) -> Tensor:
    return forward_primitive('softmax', x, axis=axis)


def reduce_mean(x, axis=None, keepdims: bool = False) -> Tensor:
    return forward_primitive('mean', x, axis=axis, keepdims=keepdims)


def reduce_sum(x, axis=None, keepdims: bool = False) -> Tensor:
    return forward_primitive('sum', x, axis=axis, keepdims=keepdims)


def scalar_mul(x, scale: Number) -> Tensor:
    return forward_primitive('scalar-mul', x, scale=float(scale))


def reverse_gradient(t: Tensor, lam: Number) -> Tensor:
    """Identity forward; multiplies the incoming gradient by -lam on the way back."""
    return forward_primitive('reverse-gradient', t, scale=float(lam))


def transpose(x) -> Tensor:
    return forward_primitive('transpose', x)


def take(x, start: int, stop: int, axis: int = 0) -> Tensor:
    return forward_primitive('slice', x, axis=axis, start=start, stop=stop)


def reshape(x, shape: Sequence[int]) -> Tensor:
    return forward_primitive('reshape', x, shape=tuple(shape))


def gather(x, indices) -> Tensor:
    return forward_primitive('gather', x, indices=tuple(int(i) for i in indices))
