//! Arithmetic in GF(2^t) for 1 <= t <= 63, determinants in characteristic
//! two, and Lagrange interpolation.
//!
//! The modulus for each degree is the lexicographically least irreducible
//! polynomial of that degree (smallest integer encoding, `x^t` bit
//! included), e.g. `x^3 + x + 1` for t = 3 and `x^8 + x^4 + x^3 + x + 1` for
//! t = 8. It is found by search on first use and cached.
//!
//! Multiplication has three interchangeable backends: log/exp tables for
//! t <= 16, the PCLMULQDQ instruction, and a portable shift-xor carryless
//! product. All of them produce identical results.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use thiserror::Error;

pub const MAX_DEGREE: u32 = 63;
const TABLE_MAX_DEGREE: u32 = 16;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GfError {
    #[error("field degree {0} is outside 1..=63")]
    UnsupportedDegree(u32),
    #[error("division by zero")]
    DivisionByZero,
    #[error("interpolation abscissa appears twice")]
    DuplicateAbscissa,
    #[error("abscissa zero is not allowed here")]
    ZeroAbscissa,
}

/// An element of GF(2^t): a polynomial over GF(2) of degree below t, packed
/// into the low bits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement(u64);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MulBackend {
    Table,
    Clmul,
    Portable,
}

struct LogTables {
    /// `exp[i] = g^i` for `i < 2 * (q - 1)`, so a sum of two logs never wraps.
    exp: Vec<u16>,
    log: Vec<u32>,
}

/// Arithmetic context for one field. Cheap to clone; immutable.
#[derive(Clone, Copy)]
pub struct FieldCtx {
    t: u32,
    modulus: u64,
    backend: MulBackend,
    tables: Option<&'static LogTables>,
}

impl PartialEq for FieldCtx {
    fn eq(&self, other: &Self) -> bool {
        (self.t, self.modulus, self.backend) == (other.t, other.modulus, other.backend)
    }
}

impl Eq for FieldCtx {}

impl std::fmt::Debug for FieldCtx {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldCtx")
            .field("t", &self.t)
            .field("modulus", &format_args!("{:#x}", self.modulus))
            .field("backend", &self.backend)
            .finish()
    }
}

/// Carryless product, one bit at a time.
pub fn clmul_portable(a: u64, b: u64) -> u128 {
    let mut acc = 0u128;
    let wide = a as u128;
    let mut b = b;
    while b != 0 {
        let i = b.trailing_zeros();
        acc ^= wide << i;
        b &= b - 1;
    }
    acc
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "pclmulqdq", enable = "sse2")]
unsafe fn clmul_pclmul(a: u64, b: u64) -> u128 {
    use std::arch::x86_64::{_mm_clmulepi64_si128, _mm_set_epi64x};
    let x = _mm_set_epi64x(0, a as i64);
    let y = _mm_set_epi64x(0, b as i64);
    let r = _mm_clmulepi64_si128(x, y, 0);
    std::mem::transmute::<_, u128>(r)
}

fn hardware_clmul_available() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        std::is_x86_feature_detected!("pclmulqdq")
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

/// Carryless product using PCLMULQDQ when the CPU has it.
pub fn clmul(a: u64, b: u64) -> u128 {
    #[cfg(target_arch = "x86_64")]
    {
        if hardware_clmul_available() {
            // SAFETY: the feature check above guarantees the instruction exists.
            return unsafe { clmul_pclmul(a, b) };
        }
    }
    clmul_portable(a, b)
}

fn poly_degree(p: u128) -> i32 {
    127 - p.leading_zeros() as i32
}

fn poly_mod(mut a: u128, m: u128) -> u128 {
    let dm = poly_degree(m);
    while a != 0 && poly_degree(a) >= dm {
        a ^= m << (poly_degree(a) - dm);
    }
    a
}

fn poly_mulmod(a: u64, b: u64, m: u64) -> u64 {
    poly_mod(clmul_portable(a, b), m as u128) as u64
}

fn poly_gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let r = poly_mod(a, b);
        a = b;
        b = r;
    }
    a
}

/// Ben-Or test: `f` of degree t is irreducible over GF(2) iff
/// `gcd(f, x^(2^i) - x) = 1` for every `1 <= i <= t/2`.
pub fn is_irreducible(f: u64) -> bool {
    if f < 2 {
        return false;
    }
    let t = 63 - f.leading_zeros();
    let mut power = 2u64; // x
    for _ in 1..=t / 2 {
        power = poly_mulmod(power, power, f);
        if poly_gcd(f as u128, (power ^ 2) as u128) != 1 {
            return false;
        }
    }
    true
}

/// The lexicographically least irreducible polynomial of degree `t`.
pub fn least_irreducible(t: u32) -> Result<u64, GfError> {
    static CACHE: [OnceLock<u64>; 64] = [const { OnceLock::new() }; 64];
    if !(1..=MAX_DEGREE).contains(&t) {
        return Err(GfError::UnsupportedDegree(t));
    }
    Ok(*CACHE[t as usize].get_or_init(|| {
        (1u64 << t..)
            .find(|&f| is_irreducible(f))
            .expect("irreducible polynomials exist in every degree")
    }))
}

fn prime_factors(mut x: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= x {
        if x.is_multiple_of(p) {
            out.push(p);
            while x.is_multiple_of(p) {
                x /= p;
            }
        }
        p += 1;
    }
    if x > 1 {
        out.push(x);
    }
    out
}

fn tables_for(t: u32, modulus: u64) -> &'static LogTables {
    static CACHE: [OnceLock<LogTables>; (TABLE_MAX_DEGREE + 1) as usize] =
        [const { OnceLock::new() }; (TABLE_MAX_DEGREE + 1) as usize];
    CACHE[t as usize].get_or_init(|| {
        let q = 1u64 << t;
        let order = q - 1;
        let factors = prime_factors(order);
        let raw = FieldCtx {
            t,
            modulus,
            backend: MulBackend::Portable,
            tables: None,
        };
        let generator = (1..q)
            .map(FieldElement)
            .find(|&g| {
                factors
                    .iter()
                    .all(|&p| raw.pow(g, (order / p) as u128) != FieldElement::ONE)
            })
            .expect("the multiplicative group is cyclic");
        let mut exp = Vec::with_capacity(2 * order as usize);
        let mut log = vec![0u32; q as usize];
        let mut x = FieldElement::ONE;
        for i in 0..order {
            exp.push(x.0 as u16);
            log[x.0 as usize] = i as u32;
            x = raw.mul(x, generator);
        }
        let doubled = exp.clone();
        exp.extend(doubled);
        LogTables { exp, log }
    })
}

impl FieldCtx {
    /// Context for GF(2^t) with the default backend for that degree.
    pub fn new(t: u32) -> Result<Self, GfError> {
        let backend = if t <= TABLE_MAX_DEGREE {
            MulBackend::Table
        } else {
            MulBackend::Clmul
        };
        Self::with_backend(t, backend)
    }

    /// Context with an explicit multiplication backend. `Table` falls back
    /// to `Clmul` above degree 16.
    pub fn with_backend(t: u32, backend: MulBackend) -> Result<Self, GfError> {
        let modulus = least_irreducible(t)?;
        let backend = match backend {
            MulBackend::Table if t > TABLE_MAX_DEGREE => MulBackend::Clmul,
            b => b,
        };
        let tables = (backend == MulBackend::Table).then(|| tables_for(t, modulus));
        Ok(FieldCtx {
            t,
            modulus,
            backend,
            tables,
        })
    }

    /// Smallest degree whose field has at least `size` elements (and at
    /// least `min_t`).
    pub fn degree_for_size(size: u128, min_t: u32) -> u32 {
        let mut t = min_t.max(1);
        while t < 127 && (1u128 << t) < size {
            t += 1;
        }
        t
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn backend(&self) -> MulBackend {
        self.backend
    }

    /// Number of field elements, `2^t`.
    pub fn size(&self) -> u64 {
        1u64 << self.t
    }

    /// Element with the given bit pattern. Panics if `bits >= 2^t`.
    pub fn element(&self, bits: u64) -> FieldElement {
        assert!(bits >> self.t == 0, "{bits:#x} is not an element of GF(2^{})", self.t);
        FieldElement(bits)
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        FieldElement(rng.gen::<u64>() >> (64 - self.t))
    }

    #[inline]
    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(a.0 ^ b.0)
    }

    #[inline]
    fn reduce(&self, mut p: u128) -> u64 {
        let t = self.t as i32;
        let m = self.modulus as u128;
        while p >> t != 0 {
            let shift = poly_degree(p) - t;
            p ^= m << shift;
        }
        p as u64
    }

    #[inline]
    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        match self.backend {
            MulBackend::Table => {
                if a.0 == 0 || b.0 == 0 {
                    return FieldElement::ZERO;
                }
                let tables = self.tables.expect("table backend has tables");
                let i = tables.log[a.0 as usize] + tables.log[b.0 as usize];
                FieldElement(tables.exp[i as usize] as u64)
            }
            MulBackend::Clmul => FieldElement(self.reduce(clmul(a.0, b.0))),
            MulBackend::Portable => FieldElement(self.reduce(clmul_portable(a.0, b.0))),
        }
    }

    pub fn square(&self, a: FieldElement) -> FieldElement {
        self.mul(a, a)
    }

    pub fn pow(&self, base: FieldElement, mut exp: u128) -> FieldElement {
        if let Some(tables) = self.tables {
            if base.is_zero() {
                return if exp == 0 { FieldElement::ONE } else { FieldElement::ZERO };
            }
            let order = (1u128 << self.t) - 1;
            let l = tables.log[base.0 as usize] as u128 * (exp % order) % order;
            return FieldElement(tables.exp[l as usize] as u64);
        }
        let mut result = FieldElement::ONE;
        let mut b = base;
        while exp > 0 {
            if exp & 1 == 1 {
                result = self.mul(result, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        result
    }

    /// Multiplicative inverse, `a^(2^t - 2)`.
    pub fn inv(&self, a: FieldElement) -> Result<FieldElement, GfError> {
        if a.is_zero() {
            return Err(GfError::DivisionByZero);
        }
        if let Some(tables) = self.tables {
            let order = (1u32 << self.t) - 1;
            let l = tables.log[a.0 as usize];
            return Ok(FieldElement(tables.exp[((order - l) % order) as usize] as u64));
        }
        Ok(self.pow(a, (1u128 << self.t) - 2))
    }

    pub fn div(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement, GfError> {
        Ok(self.mul(a, self.inv(b)?))
    }
}

/// Determinant of a row-major `dim x dim` matrix, destroying its contents.
///
/// In characteristic two the determinant coincides with the permanent.
pub fn det_in_place(ctx: &FieldCtx, a: &mut [FieldElement], dim: usize) -> FieldElement {
    debug_assert_eq!(a.len(), dim * dim);
    let mut det = FieldElement::ONE;
    for col in 0..dim {
        let Some(pivot_row) = (col..dim).find(|&r| !a[r * dim + col].is_zero()) else {
            return FieldElement::ZERO;
        };
        if pivot_row != col {
            for c in col..dim {
                a.swap(pivot_row * dim + c, col * dim + c);
            }
        }
        let pivot = a[col * dim + col];
        det = ctx.mul(det, pivot);
        let pivot_inv = ctx.inv(pivot).expect("pivot is nonzero");
        for r in col + 1..dim {
            let lead = a[r * dim + col];
            if lead.is_zero() {
                continue;
            }
            let factor = ctx.mul(lead, pivot_inv);
            for c in col + 1..dim {
                let sub = ctx.mul(factor, a[col * dim + c]);
                a[r * dim + c] = ctx.add(a[r * dim + c], sub);
            }
        }
    }
    det
}

/// Determinant over GF(2^t); the empty matrix has determinant one.
pub fn det_char2(ctx: &FieldCtx, a: &[FieldElement], dim: usize) -> FieldElement {
    assert_eq!(a.len(), dim * dim, "matrix must be square");
    let mut scratch = a.to_vec();
    det_in_place(ctx, &mut scratch, dim)
}

/// Evaluates a coefficient vector (lowest degree first) at `x`.
pub fn eval_poly(ctx: &FieldCtx, coeffs: &[FieldElement], x: FieldElement) -> FieldElement {
    coeffs
        .iter()
        .rev()
        .fold(FieldElement::ZERO, |acc, &c| ctx.add(ctx.mul(acc, x), c))
}

/// `prod (y - x_i)` as a coefficient vector, lowest degree first.
fn master_polynomial(ctx: &FieldCtx, xs: &[FieldElement]) -> Vec<FieldElement> {
    let mut master = vec![FieldElement::ZERO; xs.len() + 1];
    master[0] = FieldElement::ONE;
    for (deg, &x) in xs.iter().enumerate() {
        // multiply by (y + x); subtraction is addition here
        for a in (0..=deg + 1).rev() {
            let shifted = if a > 0 { master[a - 1] } else { FieldElement::ZERO };
            master[a] = ctx.add(shifted, ctx.mul(master[a], x));
        }
    }
    master
}

fn check_distinct(xs: &[FieldElement]) -> Result<(), GfError> {
    let mut sorted = xs.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(GfError::DuplicateAbscissa);
    }
    Ok(())
}

/// Coefficients `c_0..c_{k-1}` of the unique polynomial of degree below `k`
/// through the `k` given points.
pub fn lagrange_interpolate(
    ctx: &FieldCtx,
    points: &[(FieldElement, FieldElement)],
) -> Result<Vec<FieldElement>, GfError> {
    let k = points.len();
    let xs: Vec<FieldElement> = points.iter().map(|p| p.0).collect();
    check_distinct(&xs)?;
    let master = master_polynomial(ctx, &xs);
    let mut coeffs = vec![FieldElement::ZERO; k];
    let mut quotient = vec![FieldElement::ZERO; k];
    for &(xi, yi) in points {
        // quotient = master / (y + xi), by synthetic division from the top
        quotient[k - 1] = master[k];
        for a in (1..k).rev() {
            quotient[a - 1] = ctx.add(master[a], ctx.mul(xi, quotient[a]));
        }
        let denom = eval_poly(ctx, &quotient, xi);
        let scale = ctx.div(yi, denom)?;
        for (c, &q) in coeffs.iter_mut().zip(&quotient) {
            *c = ctx.add(*c, ctx.mul(scale, q));
        }
    }
    Ok(coeffs)
}

/// Interpolation at a fixed set of nonzero abscissae, with the O(k^2)
/// preprocessing done once and reused for many ordinate vectors.
///
/// Coefficients are produced lowest degree first, so asking only for the
/// first few (or for the lowest nonzero one) costs O(k) per coefficient.
pub struct Interpolator {
    ctx: FieldCtx,
    master: Vec<FieldElement>,
    xs: Vec<FieldElement>,
    inv_x: Vec<FieldElement>,
    /// `1 / prod_{j != i} (x_i - x_j)`
    weights: Vec<FieldElement>,
}

impl Interpolator {
    pub fn new(ctx: FieldCtx, xs: &[FieldElement]) -> Result<Self, GfError> {
        check_distinct(xs)?;
        if xs.iter().any(|x| x.is_zero()) {
            return Err(GfError::ZeroAbscissa);
        }
        let master = master_polynomial(&ctx, xs);
        // derivative of the master polynomial; odd-degree terms survive
        let derivative: Vec<FieldElement> = (1..master.len())
            .map(|a| if a % 2 == 1 { master[a] } else { FieldElement::ZERO })
            .collect();
        let weights = xs
            .iter()
            .map(|&x| ctx.inv(eval_poly(&ctx, &derivative, x)))
            .collect::<Result<Vec<_>, _>>()?;
        let inv_x = xs
            .iter()
            .map(|&x| ctx.inv(x))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Interpolator {
            ctx,
            master,
            xs: xs.to_vec(),
            inv_x,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Per-point multipliers `m_i` such that coefficient `j` of the
    /// interpolant equals `sum_i m_i * y_i`, for `j = 0, 1, ...` in turn.
    pub fn coefficient_rows(&self) -> CoefficientRows<'_> {
        CoefficientRows {
            interp: self,
            quotient: vec![FieldElement::ZERO; self.len()],
            row: vec![FieldElement::ZERO; self.len()],
            degree: 0,
        }
    }

    /// All coefficients of the interpolant through `(x_i, ys[i])`.
    pub fn coefficients(&self, ys: &[FieldElement]) -> Vec<FieldElement> {
        assert_eq!(ys.len(), self.len());
        let mut rows = self.coefficient_rows();
        (0..self.len())
            .map(|_| {
                let row = rows.next_row();
                self.dot(row, ys)
            })
            .collect()
    }

    /// Index of the lowest nonzero coefficient, if any.
    pub fn lowest_nonzero(&self, ys: &[FieldElement]) -> Option<usize> {
        assert_eq!(ys.len(), self.len());
        if ys.iter().all(|y| y.is_zero()) {
            return None;
        }
        let mut rows = self.coefficient_rows();
        (0..self.len()).find(|_| {
            let row = rows.next_row();
            !self.dot(row, ys).is_zero()
        })
    }

    /// Multiplier vector for coefficient `j` alone.
    pub fn coefficient_row(&self, j: usize) -> Vec<FieldElement> {
        let k = self.len();
        assert!(j < k);
        if j <= k / 2 {
            let mut rows = self.coefficient_rows();
            for _ in 0..j {
                rows.next_row();
            }
            return rows.next_row().to_vec();
        }
        // from the top: q_{k-1} = 1 and q_{a-1} = M_a + x_i q_a
        let ctx = &self.ctx;
        let mut q = vec![FieldElement::ONE; k];
        for a in (j + 1..k).rev() {
            let m = self.master[a];
            for (qi, &x) in q.iter_mut().zip(&self.xs) {
                *qi = ctx.add(m, ctx.mul(x, *qi));
            }
        }
        q.iter().zip(&self.weights).map(|(&qi, &w)| ctx.mul(qi, w)).collect()
    }

    pub fn dot(&self, row: &[FieldElement], ys: &[FieldElement]) -> FieldElement {
        row.iter()
            .zip(ys)
            .fold(FieldElement::ZERO, |acc, (&m, &y)| self.ctx.add(acc, self.ctx.mul(m, y)))
    }
}

/// Shared interpolator through the points `1, 2, ..., len` of `ctx`'s field,
/// built once per process.
pub fn shared_interpolator(ctx: FieldCtx, len: usize) -> Arc<Interpolator> {
    type Cache = Mutex<HashMap<(u32, MulBackend, usize), Arc<Interpolator>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let key = (ctx.t(), ctx.backend(), len);
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().expect("interpolator cache").get(&key) {
        return hit.clone();
    }
    assert!((len as u128) < (1u128 << ctx.t()), "field too small for {len} points");
    let xs: Vec<FieldElement> = (1..=len as u64).map(|i| ctx.element(i)).collect();
    let built = Arc::new(Interpolator::new(ctx, &xs).expect("points are distinct and nonzero"));
    cache.lock().expect("interpolator cache").entry(key).or_insert(built).clone()
}

/// Streaming producer of [`Interpolator`] coefficient multipliers.
pub struct CoefficientRows<'a> {
    interp: &'a Interpolator,
    /// coefficient `degree - 1` of `master / (y + x_i)` for every i
    quotient: Vec<FieldElement>,
    row: Vec<FieldElement>,
    degree: usize,
}

impl CoefficientRows<'_> {
    /// Multipliers for the next coefficient; valid until the next call.
    pub fn next_row(&mut self) -> &[FieldElement] {
        let ctx = &self.interp.ctx;
        let m = self.interp.master[self.degree];
        // master = (y + x_i) q  gives  q_a = (M_a + q_{a-1}) / x_i
        for (q, &ix) in self.quotient.iter_mut().zip(&self.interp.inv_x) {
            *q = ctx.mul(ctx.add(m, *q), ix);
        }
        self.degree += 1;
        for ((r, &q), &w) in self.row.iter_mut().zip(&self.quotient).zip(&self.interp.weights) {
            *r = ctx.mul(q, w);
        }
        &self.row
    }
}
