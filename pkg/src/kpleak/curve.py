"""secp256k1 field and point arithmetic.

Points on the ladder live in homogeneous projective coordinates and are
combined with the exception-free a=0 complete addition law; doubling is the
same law applied to (P, P).  An affine double-and-add multiplier, written
independently of the projective code, serves as the correctness oracle.
"""
from __future__ import annotations

from dataclasses import dataclass


class CurveError(ValueError):
    pass


P_SECP256K1 = 2**256 - 2**32 - 977


@dataclass(frozen=True)
class CurveParams:
    p: int
    a: int
    b: int
    gx: int
    gy: int
    n: int
    b3: int

    @property
    def G(self) -> AffinePoint:
        return AffinePoint(self.gx, self.gy)


SECP256K1 = CurveParams(
    p=P_SECP256K1,
    a=0,
    b=7,
    gx=0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798,
    gy=0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8,
    n=0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141,
    b3=21,
)

_P = SECP256K1.p


# Field elements are canonical Python ints in [0, p).

def field_add(a: int, b: int, p: int = _P) -> int:
    return (a + b) % p


def field_sub(a: int, b: int, p: int = _P) -> int:
    return (a - b) % p


def field_mul(a: int, b: int, p: int = _P) -> int:
    return (a * b) % p


def field_inv(a: int, p: int = _P) -> int:
    if a % p == 0:
        raise ZeroDivisionError("inversion of zero in the prime field")
    return pow(a, -1, p)


@dataclass(frozen=True)
class AffinePoint:
    x: int = 0
    y: int = 0
    infinity: bool = False

    @classmethod
    def identity(cls) -> AffinePoint:
        return cls(0, 0, True)

    def on_curve(self, curve: CurveParams = SECP256K1) -> bool:
        if self.infinity:
            return True
        p = curve.p
        return (self.y * self.y - self.x**3 - curve.a * self.x - curve.b) % p == 0

    def __neg__(self) -> AffinePoint:
        if self.infinity:
            return self
        return AffinePoint(self.x, (-self.y) % _P)


@dataclass(frozen=True, eq=False)
class ProjectivePoint:
    """Homogeneous projective point (X : Y : Z); Z == 0 is the identity."""

    X: int
    Y: int
    Z: int

    @classmethod
    def identity(cls) -> ProjectivePoint:
        return cls(0, 1, 0)

    @classmethod
    def from_affine(cls, pt: AffinePoint, scale: int = 1) -> ProjectivePoint:
        if pt.infinity:
            return cls.identity()
        s = scale % _P
        if s == 0:
            raise CurveError("projective scale must be non-zero")
        return cls(pt.x * s % _P, pt.y * s % _P, s)

    @property
    def is_identity(self) -> bool:
        return self.Z % _P == 0

    def coords(self) -> tuple[int, int, int]:
        return (self.X, self.Y, self.Z)

    def on_curve(self, curve: CurveParams = SECP256K1) -> bool:
        p = curve.p
        X, Y, Z = self.X, self.Y, self.Z
        if Z % p == 0:
            return X % p == 0 and Y % p != 0
        return (Y * Y * Z - X**3 - curve.b * Z**3) % p == 0

    def __eq__(self, other: object) -> bool:
        # cross-multiplication; never compare raw coordinates
        if not isinstance(other, ProjectivePoint):
            return NotImplemented
        if self.is_identity or other.is_identity:
            return self.is_identity and other.is_identity
        return (
            (self.X * other.Z - other.X * self.Z) % _P == 0
            and (self.Y * other.Z - other.Y * self.Z) % _P == 0
        )

    def __hash__(self) -> int:
        return hash(to_affine(self))

    def __neg__(self) -> ProjectivePoint:
        return ProjectivePoint(self.X, (-self.Y) % _P, self.Z)


def complete_add(P: ProjectivePoint, Q: ProjectivePoint, curve: CurveParams = SECP256K1) -> ProjectivePoint:
    """Complete addition for y^2 = x^3 + b (12M + 2m_3b + 19a).

    Straight-line: the same sequence of field operations runs for every pair
    of inputs, including P == Q, P == -Q and identity operands.
    """
    p, b3 = curve.p, curve.b3
    X1, Y1, Z1 = P.X, P.Y, P.Z
    X2, Y2, Z2 = Q.X, Q.Y, Q.Z
    t0 = X1 * X2 % p
    t1 = Y1 * Y2 % p
    t2 = Z1 * Z2 % p
    t3 = (X1 + Y1) % p
    t4 = (X2 + Y2) % p
    t3 = t3 * t4 % p
    t4 = (t0 + t1) % p
    t3 = (t3 - t4) % p
    t4 = (Y1 + Z1) % p
    X3 = (Y2 + Z2) % p
    t4 = t4 * X3 % p
    X3 = (t1 + t2) % p
    t4 = (t4 - X3) % p
    X3 = (X1 + Z1) % p
    Y3 = (X2 + Z2) % p
    X3 = X3 * Y3 % p
    Y3 = (t0 + t2) % p
    Y3 = (X3 - Y3) % p
    X3 = (t0 + t0) % p
    t0 = (X3 + t0) % p
    t2 = b3 * t2 % p
    Z3 = (t1 + t2) % p
    t1 = (t1 - t2) % p
    Y3 = b3 * Y3 % p
    X3 = t4 * Y3 % p
    t2 = t3 * t1 % p
    X3 = (t2 - X3) % p
    Y3 = Y3 * t0 % p
    t1 = t1 * Z3 % p
    Y3 = (t1 + Y3) % p
    t0 = t0 * t3 % p
    Z3 = Z3 * t4 % p
    Z3 = (Z3 + t0) % p
    return ProjectivePoint(X3, Y3, Z3)


def double(P: ProjectivePoint, curve: CurveParams = SECP256K1) -> ProjectivePoint:
    return complete_add(P, P, curve)


def to_affine(P: ProjectivePoint, curve: CurveParams = SECP256K1) -> AffinePoint:
    if P.Z % curve.p == 0:
        return AffinePoint.identity()
    zi = field_inv(P.Z, curve.p)
    return AffinePoint(P.X * zi % curve.p, P.Y * zi % curve.p)


def affine_add(A: AffinePoint, B: AffinePoint, curve: CurveParams = SECP256K1) -> AffinePoint:
    """Textbook chord-and-tangent addition with explicit special cases."""
    p = curve.p
    if A.infinity:
        return B
    if B.infinity:
        return A
    if A.x == B.x:
        if (A.y + B.y) % p == 0:
            return AffinePoint.identity()
        lam = (3 * A.x * A.x + curve.a) * pow(2 * A.y, -1, p) % p
    else:
        lam = (B.y - A.y) * pow(B.x - A.x, -1, p) % p
    x = (lam * lam - A.x - B.x) % p
    y = (lam * (A.x - x) - A.y) % p
    return AffinePoint(x, y)


def reference_scalar_mul(k: int, P: AffinePoint, curve: CurveParams = SECP256K1) -> AffinePoint:
    """Right-to-left affine double-and-add; the oracle for the ladders."""
    if k < 0:
        raise CurveError("scalar must be non-negative")
    acc = AffinePoint.identity()
    addend = P
    while k:
        if k & 1:
            acc = affine_add(acc, addend, curve)
        addend = affine_add(addend, addend, curve)
        k >>= 1
    return acc
