//! Arithmetic in GF(2^w) for 8 <= w <= 64.
//!
//! Elements are `u64` bit patterns of polynomials over GF(2), reduced modulo
//! a fixed irreducible `x^w + low(x)`. Widths 32 and 64 use fixed moduli;
//! other widths use the first irreducible found by [`find_irreducible`].
//!
//! The interpolation kernels exploit that every evaluation point the
//! obfuscator uses is a small integer, so most products have one short
//! operand and need only a few shift/xor steps.

use rand::Rng;

use crate::error::{invalid, Result};

pub const MIN_WIDTH: u32 = 8;
pub const MAX_WIDTH: u32 = 64;

/// `x^64 + x^4 + x^3 + x + 1`
const LOW_64: u64 = 0x1B;
/// `x^32 + x^7 + x^3 + x^2 + 1`
const LOW_32: u64 = 0x8D;

/// Lanes processed together in the quadratic kernels, for vectorization.
const LANES: usize = 8;

/// Runs a kernel monomorphized for the field's fastest short multiplication.
macro_rules! dispatch_small {
    ($field:expr, $bits:expr, |$mul:ident| $body:expr) => {{
        let field: &Field = $field;
        let bits: u32 = $bits;
        if bits > SMALL_BITS {
            let $mul = Generic { field: *field };
            $body
        } else if field.width == 64 && field.low == LOW_64 {
            // fixed trip counts let the short multiply unroll
            match bits {
                0..=4 => {
                    let $mul = Small64::<4>;
                    $body
                }
                5..=8 => {
                    let $mul = Small64::<8>;
                    $body
                }
                9..=12 => {
                    let $mul = Small64::<12>;
                    $body
                }
                _ => {
                    let $mul = Small64::<16>;
                    $body
                }
            }
        } else if field.width + SMALL_BITS <= 64 {
            let $mul = SmallWord {
                field: *field,
                bits,
            };
            $body
        } else {
            let $mul = Generic { field: *field };
            $body
        }
    }};
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Field {
    width: u32,
    low: u64,
}

impl Field {
    pub fn new(width: u32) -> Result<Self> {
        if !(MIN_WIDTH..=MAX_WIDTH).contains(&width) {
            return Err(invalid(format!(
                "field width must be in {MIN_WIDTH}..={MAX_WIDTH}, got {width}"
            )));
        }
        let low = match width {
            64 => LOW_64,
            32 => LOW_32,
            w => find_irreducible(w),
        };
        Ok(Self { width, low })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// The modulus without its leading `x^w` term.
    pub fn modulus_low(&self) -> u64 {
        self.low
    }

    pub fn mask(&self) -> u64 {
        if self.width == 64 {
            u64::MAX
        } else {
            (1u64 << self.width) - 1
        }
    }

    pub fn contains(&self, a: u64) -> bool {
        a & !self.mask() == 0
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.random::<u64>() & self.mask()
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce(clmul(a, b))
    }

    pub fn square(&self, a: u64) -> u64 {
        self.mul(a, a)
    }

    pub fn pow(&self, mut a: u64, mut e: u128) -> u64 {
        let mut r = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(r, a);
            }
            a = self.square(a);
            e >>= 1;
        }
        r
    }

    /// Multiplicative inverse, `a^(2^w - 2)`.
    pub fn inv(&self, a: u64) -> Result<u64> {
        if a == 0 {
            return Err(invalid("inverse of zero in GF(2^w)"));
        }
        Ok(self.pow(a, (1u128 << self.width) - 2))
    }

    /// Inverts every element with one field inversion (Montgomery's trick).
    pub fn batch_inv(&self, values: &[u64]) -> Result<Vec<u64>> {
        let mut prefix = Vec::with_capacity(values.len());
        let mut acc = 1u64;
        for &v in values {
            if v == 0 {
                return Err(invalid("inverse of zero in GF(2^w)"));
            }
            prefix.push(acc);
            acc = self.mul(acc, v);
        }
        let mut inv_acc = self.inv(acc)?;
        let mut out = vec![0u64; values.len()];
        for i in (0..values.len()).rev() {
            out[i] = self.mul(inv_acc, prefix[i]);
            inv_acc = self.mul(inv_acc, values[i]);
        }
        Ok(out)
    }

    #[inline]
    fn reduce(&self, mut r: u128) -> u64 {
        let w = self.width;
        loop {
            let hi = r >> w;
            if hi == 0 {
                return r as u64;
            }
            r &= (1u128 << w) - 1;
            let mut low = self.low;
            while low != 0 {
                let k = low.trailing_zeros();
                r ^= hi << k;
                low &= low - 1;
            }
        }
    }

    /// Horner evaluation of `sum coeffs[i] x^i`.
    pub fn eval_poly(&self, coeffs: &[u64], x: u64) -> u64 {
        coeffs.iter().rev().fold(0, |acc, &c| self.mul(acc, x) ^ c)
    }

    /// Evaluates a polynomial at many points. Fast when the points are small
    /// integers (bit length at most [`SMALL_BITS`]), as share points are.
    pub fn eval_poly_many(&self, coeffs: &[u64], points: &[u64]) -> Result<Vec<u64>> {
        let bits = self.small_bits(points)?;
        Ok(dispatch_small!(self, bits, |mul| eval_small_points_kernel(
            coeffs, points, mul
        )))
    }

    /// `p(0)` of the unique polynomial of degree `< len` through
    /// `(xs[j], ys[j])`; the `xs` must be distinct and nonzero, and the
    /// computation is fast when they are small integers.
    pub fn interpolate_at_zero(&self, xs: &[u64], ys: &[u64]) -> Result<u64> {
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(invalid(
                "interpolation needs equally many (nonzero count) x and y values",
            ));
        }
        // Every factor below is an xor of two small points, so shares the bound.
        let bits = self.small_bits(xs)?;
        let (total, denominators) = dispatch_small!(self, bits, |mul| {
            let total = xs.iter().fold(1u64, |acc, &x| mul.mul(acc, x));
            (total, denominators_kernel(xs, mul))
        });
        if total == 0 || denominators.contains(&0) {
            return Err(invalid("interpolation points must be distinct and nonzero"));
        }
        // L_j(0) = prod_{k != j} x_k / (x_j + x_k) = total / (x_j prod_{k != j} (x_j + x_k))
        let inverses = self.batch_inv(&denominators)?;
        let sum = ys
            .iter()
            .zip(&inverses)
            .fold(0u64, |acc, (&y, &d)| acc ^ self.mul(y, d));
        Ok(self.mul(total, sum))
    }

    /// Generic Lagrange interpolation; returns coefficients, lowest degree first.
    pub fn lagrange_interpolate(&self, points: &[(u64, u64)]) -> Result<Vec<u64>> {
        let n = points.len();
        if n == 0 {
            return Err(invalid("cannot interpolate zero points"));
        }
        if points
            .iter()
            .any(|&(x, y)| !self.contains(x) || !self.contains(y))
        {
            return Err(invalid("interpolation point outside the field"));
        }
        // master = prod (X - x_k)
        let mut master = vec![1u64];
        for &(x, _) in points {
            let mut next = vec![0u64; master.len() + 1];
            for (i, &c) in master.iter().enumerate() {
                next[i + 1] ^= c;
                next[i] ^= self.mul(c, x);
            }
            master = next;
        }
        let mut coeffs = vec![0u64; n];
        for (j, &(xj, yj)) in points.iter().enumerate() {
            let mut denom = 1u64;
            for (k, &(xk, _)) in points.iter().enumerate() {
                if k != j {
                    denom = self.mul(denom, xj ^ xk);
                }
            }
            if denom == 0 {
                return Err(invalid("interpolation points must be distinct"));
            }
            let scale = self.mul(yj, self.inv(denom)?);
            // master / (X - x_j) by synthetic division
            let mut carry = 0u64;
            for i in (0..n).rev() {
                carry = master[i + 1] ^ self.mul(carry, xj);
                coeffs[i] ^= self.mul(carry, scale);
            }
        }
        Ok(coeffs)
    }

    fn small_bits(&self, points: &[u64]) -> Result<u32> {
        let max = points.iter().copied().max().unwrap_or(0);
        let bits = 64 - max.leading_zeros();
        if !self.contains(max) {
            return Err(invalid(format!("evaluation point {max} outside the field")));
        }
        Ok(bits.max(1))
    }

    /// Reduces a single-word product of degree `< width + SMALL_BITS`.
    #[inline]
    fn reduce_word(&self, r: u64) -> u64 {
        self.reduce(r as u128)
    }
}

/// Multiplication where the second operand is a short field element.
trait SmallMul: Copy {
    fn mul(self, a: u64, s: u64) -> u64;
}

#[derive(Clone, Copy)]
struct Small64<const BITS: u32>;

impl<const BITS: u32> SmallMul for Small64<BITS> {
    #[inline(always)]
    fn mul(self, a: u64, s: u64) -> u64 {
        mul_small_64(a, s, BITS)
    }
}

/// Widths where the unreduced product fits in one word.
#[derive(Clone, Copy)]
struct SmallWord {
    field: Field,
    bits: u32,
}

impl SmallMul for SmallWord {
    #[inline(always)]
    fn mul(self, a: u64, s: u64) -> u64 {
        self.field.reduce_word(clmul_small_word(a, s, self.bits))
    }
}

#[derive(Clone, Copy)]
struct Generic {
    field: Field,
}

impl SmallMul for Generic {
    #[inline(always)]
    fn mul(self, a: u64, s: u64) -> u64 {
        self.field.mul(a, s)
    }
}

/// Largest bit length treated as a "small" operand.
pub const SMALL_BITS: u32 = 16;

/// Carry-less 64x64 -> 128 product with a 4-bit window.
#[inline]
pub fn clmul(a: u64, b: u64) -> u128 {
    let mut table = [0u128; 16];
    let a = a as u128;
    for k in 1..16 {
        table[k] = if k & 1 == 1 {
            table[k - 1] ^ a
        } else {
            table[k >> 1] << 1
        };
    }
    let mut r = 0u128;
    for i in (0..16).rev() {
        r = (r << 4) ^ table[((b >> (4 * i)) & 15) as usize];
    }
    r
}

#[inline(always)]
fn clmul_small_word(a: u64, s: u64, bits: u32) -> u64 {
    let mut r = 0u64;
    for i in 0..bits {
        r ^= (a << i) & 0u64.wrapping_sub((s >> i) & 1);
    }
    r
}

#[inline(always)]
fn mul_small_64(a: u64, s: u64, bits: u32) -> u64 {
    let mut lo = a & 0u64.wrapping_sub(s & 1);
    let mut hi = 0u64;
    for i in 1..bits {
        let mask = 0u64.wrapping_sub((s >> i) & 1);
        lo ^= (a << i) & mask;
        hi ^= (a >> (64 - i)) & mask;
    }
    // hi has at most SMALL_BITS - 1 bits, so one fold by x^4 + x^3 + x + 1 suffices
    lo ^ hi ^ (hi << 1) ^ (hi << 3) ^ (hi << 4)
}

fn eval_small_points_kernel<M: SmallMul>(coeffs: &[u64], points: &[u64], mul: M) -> Vec<u64> {
    let mut out = Vec::with_capacity(points.len());
    for chunk in points.chunks(LANES) {
        let mut acc = [0u64; LANES];
        let mut xs = [0u64; LANES];
        xs[..chunk.len()].copy_from_slice(chunk);
        for &c in coeffs.iter().rev() {
            for l in 0..LANES {
                acc[l] = mul.mul(acc[l], xs[l]) ^ c;
            }
        }
        out.extend_from_slice(&acc[..chunk.len()]);
    }
    out
}

/// `x_j * prod_{k != j} (x_j + x_k)` for every `j`.
fn denominators_kernel<M: SmallMul>(xs: &[u64], mul: M) -> Vec<u64> {
    let mut out = Vec::with_capacity(xs.len());
    for (c, chunk) in xs.chunks(LANES).enumerate() {
        let base = c * LANES;
        let mut acc = [1u64; LANES];
        let mut own = [0u64; LANES];
        own[..chunk.len()].copy_from_slice(chunk);
        for (k, &xk) in xs.iter().enumerate() {
            for l in 0..LANES {
                // the j == k factor is replaced by x_j itself
                let skip = ((base + l == k) as u64).wrapping_sub(1);
                let f = own[l] ^ (xk & skip);
                acc[l] = mul.mul(acc[l], f);
            }
        }
        out.extend_from_slice(&acc[..chunk.len()]);
    }
    out
}

/// Polynomial arithmetic over GF(2) on `u128` bit patterns (degree <= 127).
mod poly2 {
    pub fn degree(a: u128) -> i32 {
        127 - a.leading_zeros() as i32
    }

    pub fn rem(mut a: u128, m: u128) -> u128 {
        let dm = degree(m);
        while a != 0 && degree(a) >= dm {
            a ^= m << (degree(a) - dm);
        }
        a
    }

    pub fn mulmod(a: u128, b: u128, m: u128) -> u128 {
        let mut r = 0u128;
        let mut a = rem(a, m);
        let mut b = b;
        let dm = degree(m);
        while b != 0 {
            if b & 1 == 1 {
                r ^= a;
            }
            b >>= 1;
            a <<= 1;
            if degree(a) >= dm {
                a ^= m;
            }
        }
        r
    }

    pub fn gcd(mut a: u128, mut b: u128) -> u128 {
        while b != 0 {
            let r = rem(a, b);
            a = b;
            b = r;
        }
        a
    }
}

/// Rabin's irreducibility test for the degree-`w` polynomial `x^w + low`.
pub fn is_irreducible(width: u32, low: u64) -> bool {
    if width == 0 || width > MAX_WIDTH || (width < 64 && low >> width != 0) {
        return false;
    }
    let m = (1u128 << width) | low as u128;
    let x = 2u128;
    // x^(2^k) mod m
    let frob = |k: u32| {
        let mut t = x;
        for _ in 0..k {
            t = poly2::mulmod(t, t, m);
        }
        t
    };
    if frob(width) != x {
        return false;
    }
    prime_factors(width).into_iter().all(|q| {
        let t = frob(width / q) ^ x;
        poly2::degree(poly2::gcd(m, t)) == 0
    })
}

fn prime_factors(mut n: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            out.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// First irreducible `x^w + low` by weight (trinomials, then pentanomials),
/// then by numeric value of `low`.
pub fn find_irreducible(width: u32) -> u64 {
    for k in 1..width {
        let low = (1u64 << k) | 1;
        if is_irreducible(width, low) {
            return low;
        }
    }
    for a in 3..width {
        for b in 2..a {
            for c in 1..b {
                let low = (1u64 << a) | (1u64 << b) | (1u64 << c) | 1;
                if is_irreducible(width, low) {
                    return low;
                }
            }
        }
    }
    unreachable!("every degree in 8..=64 has an irreducible trinomial or pentanomial")
}
