//! Exact field scalars.
//!
//! Everything downstream is generic over [`Field`]: arbitrary-precision
//! rationals for characteristic zero, and `GfP` for prime fields with the
//! modulus carried per element so a single type covers every prime chosen at
//! runtime. There is deliberately no floating-point implementation.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{One, Zero};

pub use num_rational::BigRational as Rational;

/// An exact field. `from_int` embeds the integers (signs, small constants).
pub trait Field:
    Clone
    + PartialEq
    + fmt::Debug
    + fmt::Display
    + Zero
    + One
    + Neg<Output = Self>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    /// Multiplicative inverse. Panics on zero.
    fn inv(&self) -> Self;

    fn from_int(n: i64) -> Self;

    /// A short human-readable name for error messages.
    fn field_name() -> &'static str;
}

impl Field for Rational {
    fn inv(&self) -> Self {
        if self.is_zero() {
            panic!("division by zero in Q");
        }
        self.recip()
    }

    fn from_int(n: i64) -> Self {
        Rational::from_integer(n.into())
    }

    fn field_name() -> &'static str {
        "Q"
    }
}

/// Element of the prime field F_p.
///
/// The modulus travels with the element. `modulus == 0` marks an integer
/// literal produced by `zero`/`one`/`from_int` before it has touched any
/// attached element; literals adopt a modulus on first contact. This keeps
/// `GfP` compatible with the nullary constructors of `num_traits` while the
/// prime is only known at runtime.
#[derive(Clone, Copy, Debug)]
pub struct GfP {
    value: i64,
    modulus: u64,
}

impl GfP {
    pub fn new(value: i64, modulus: u64) -> Self {
        assert!(modulus >= 2, "modulus must be at least 2");
        GfP {
            value: reduce(value as i128, modulus),
            modulus,
        }
    }

    /// An integer literal that adopts a modulus on first use.
    pub fn literal(value: i64) -> Self {
        GfP { value, modulus: 0 }
    }

    pub fn value(&self) -> i64 {
        self.value
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    fn joint_modulus(&self, other: &Self) -> u64 {
        match (self.modulus, other.modulus) {
            (0, m) | (m, 0) => m,
            (a, b) => {
                assert_eq!(a, b, "mixed moduli {a} and {b}");
                a
            }
        }
    }

    fn attached(&self, modulus: u64) -> i64 {
        if modulus == 0 {
            self.value
        } else {
            reduce(self.value as i128, modulus)
        }
    }
}

fn reduce(value: i128, modulus: u64) -> i64 {
    let m = modulus as i128;
    (((value % m) + m) % m) as i64
}

/// Deterministic Miller-Rabin, valid for all u64.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

impl PartialEq for GfP {
    fn eq(&self, other: &Self) -> bool {
        let m = self.joint_modulus(other);
        self.attached(m) == other.attached(m)
    }
}

impl Eq for GfP {}

impl fmt::Display for GfP {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Add for GfP {
    type Output = GfP;
    fn add(self, rhs: GfP) -> GfP {
        let m = self.joint_modulus(&rhs);
        let v = self.value as i128 + rhs.value as i128;
        if m == 0 {
            GfP::literal(i64::try_from(v).expect("literal overflow"))
        } else {
            GfP { value: reduce(v, m), modulus: m }
        }
    }
}

impl Sub for GfP {
    type Output = GfP;
    fn sub(self, rhs: GfP) -> GfP {
        self + (-rhs)
    }
}

impl Mul for GfP {
    type Output = GfP;
    fn mul(self, rhs: GfP) -> GfP {
        let m = self.joint_modulus(&rhs);
        let v = self.value as i128 * rhs.value as i128;
        if m == 0 {
            GfP::literal(i64::try_from(v).expect("literal overflow"))
        } else {
            GfP { value: reduce(v, m), modulus: m }
        }
    }
}

impl Neg for GfP {
    type Output = GfP;
    fn neg(self) -> GfP {
        if self.modulus == 0 {
            GfP::literal(-self.value)
        } else {
            GfP { value: reduce(-(self.value as i128), self.modulus), modulus: self.modulus }
        }
    }
}

impl Div for GfP {
    type Output = GfP;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: GfP) -> GfP {
        self * rhs.inv()
    }
}

impl Zero for GfP {
    fn zero() -> Self {
        GfP::literal(0)
    }
    fn is_zero(&self) -> bool {
        if self.modulus == 0 {
            self.value == 0
        } else {
            self.attached(self.modulus) == 0
        }
    }
}

impl One for GfP {
    fn one() -> Self {
        GfP::literal(1)
    }
}

impl Field for GfP {
    fn inv(&self) -> Self {
        if self.modulus == 0 {
            match self.value {
                1 => GfP::literal(1),
                -1 => GfP::literal(-1),
                0 => panic!("division by zero in F_p"),
                v => panic!("cannot invert unattached literal {v}"),
            }
        } else {
            let (g, x, _) = ext_gcd(self.value, self.modulus as i64);
            assert!(g == 1, "zero or non-unit in F_{}", self.modulus);
            GfP { value: reduce(x as i128, self.modulus), modulus: self.modulus }
        }
    }

    fn from_int(n: i64) -> Self {
        GfP::literal(n)
    }

    fn field_name() -> &'static str {
        "F_p"
    }
}

fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a.abs(), a.signum(), 0)
    } else {
        let (g, x, y) = ext_gcd(b, a % b);
        (g, y, x - (a / b) * y)
    }
}
