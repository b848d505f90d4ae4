"""Geometric products over bitmask basis blades.

A basis blade is stored as an integer whose bit i is set when generator i is a
factor. Dense multivectors index their coefficients by that integer, sparse
ones keep a tuple of blade names next to the coefficient array.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _bit_count(value):
    count = 0
    while value != 0:
        count += value & 1
        value >>= 1
    return count


@njit(cache=True)
def blade_product(left, right, metric):
    """Blade and sign of the geometric product of two basis blades."""
    swaps = 0
    shifted = left >> 1
    while shifted != 0:
        swaps += _bit_count(shifted & right)
        shifted >>= 1
    sign = 1.0
    if swaps % 2 == 1:
        sign = -1.0
    common = left & right
    index = 0
    while common != 0:
        if common & 1:
            sign *= metric[index]
        common >>= 1
        index += 1
    return left ^ right, sign


@njit(cache=True)
def _product_table(left_bits, right_bits, metric):
    size = left_bits.size * right_bits.size
    left_index = np.empty(size, dtype=np.int64)
    right_index = np.empty(size, dtype=np.int64)
    out_index = np.empty(size, dtype=np.int64)
    signs = np.empty(size, dtype=np.float64)
    k = 0
    for i in range(left_bits.size):
        for j in range(right_bits.size):
            blade, sign = blade_product(left_bits[i], right_bits[j], metric)
            if sign != 0.0:
                left_index[k] = i
                right_index[k] = j
                out_index[k] = blade
                signs[k] = sign
                k += 1
    return left_index[:k], right_index[:k], out_index[:k], signs[:k]


@njit(cache=True)
def _accumulate_products(
    left, right, left_index, right_index, out_index, signs, out
):
    for n in range(left.shape[0]):
        for k in range(signs.size):
            out[n, out_index[k]] += (
                signs[k] * left[n, left_index[k]] * right[n, right_index[k]]
            )
    return out


class Algebra:
    def __init__(self, name: str, generators: str, metric: tuple[float, ...]):
        assert len(generators) == len(
            metric
        ), "Every generator needs a metric signature"
        self.name = name
        self.generators = generators
        self.metric = np.asarray(metric, dtype=np.float64)
        self.dimension = 1 << len(generators)
        self._tables = {}

    def __repr__(self) -> str:
        return f"Algebra({self.name!r}, {self.generators!r})"

    def blade(self, name: str) -> int:
        if name == "1":
            return 0
        if not name.startswith("e") or len(name) == 1:
            raise ValueError(f"Invalid blade name {name!r}")
        indices = []
        for generator in name[1:]:
            if generator not in self.generators:
                raise ValueError(f"Blade {name!r} is not part of {self.name}")
            indices.append(self.generators.index(generator))
        if indices != sorted(set(indices)):
            raise ValueError(f"Blade {name!r} is not in canonical order")
        return sum(1 << index for index in indices)

    def blade_name(self, bits: int) -> str:
        if bits == 0:
            return "1"
        return "e" + "".join(
            generator
            for index, generator in enumerate(self.generators)
            if bits >> index & 1
        )

    @property
    def blade_names(self) -> tuple[str, ...]:
        order = sorted(
            range(self.dimension), key=lambda bits: (bin(bits).count("1"), bits)
        )
        return tuple(self.blade_name(bits) for bits in order)

    @property
    def dense_blades(self) -> tuple[str, ...]:
        """Blade names in the coefficient order of a dense multivector."""
        return tuple(self.blade_name(bits) for bits in range(self.dimension))

    def bits(self, blades) -> np.ndarray:
        return np.array([self.blade(name) for name in blades], dtype=np.int64)

    def grade(self, name: str) -> int:
        return bin(self.blade(name)).count("1")

    def reverse_signs(self, blades) -> np.ndarray:
        grades = np.array([self.grade(name) for name in blades])
        return np.where((grades * (grades - 1) // 2) % 2 == 1, -1.0, 1.0)

    def _table(self, left_blades: tuple, right_blades: tuple):
        key = (left_blades, right_blades)
        if key not in self._tables:
            self._tables[key] = _product_table(
                self.bits(left_blades), self.bits(right_blades), self.metric
            )
        return self._tables[key]

    def product(self, left, left_blades, right, right_blades) -> np.ndarray:
        """Geometric product of two sparse multivectors as a dense multivector."""
        left_blades = tuple(left_blades)
        right_blades = tuple(right_blades)
        left = np.asarray(left, dtype=np.float64)
        right = np.asarray(right, dtype=np.float64)
        assert left.shape[-1] == len(left_blades), "Coefficients do not match blades"
        assert right.shape[-1] == len(right_blades), "Coefficients do not match blades"
        batch = np.broadcast_shapes(left.shape[:-1], right.shape[:-1])
        left = np.ascontiguousarray(
            np.broadcast_to(left, batch + left.shape[-1:]).reshape(-1, len(left_blades))
        )
        right = np.ascontiguousarray(
            np.broadcast_to(right, batch + right.shape[-1:]).reshape(
                -1, len(right_blades)
            )
        )
        out = np.zeros((left.shape[0], self.dimension))
        _accumulate_products(
            left, right, *self._table(left_blades, right_blades), out
        )
        return out.reshape(batch + (self.dimension,))

    def embed(self, coefficients, blades) -> np.ndarray:
        coefficients = np.asarray(coefficients, dtype=np.float64)
        dense = np.zeros(coefficients.shape[:-1] + (self.dimension,))
        dense[..., self.bits(blades)] = coefficients
        return dense

    def coefficients(self, dense, blades) -> np.ndarray:
        return np.asarray(dense)[..., self.bits(blades)]


PGA = Algebra("PGA", "0123", (0.0, 1.0, 1.0, 1.0))
CGA = Algebra("CGA", "12345", (1.0, 1.0, 1.0, 1.0, -1.0))
