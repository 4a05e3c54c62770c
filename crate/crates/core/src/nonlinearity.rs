//! Edge nonlinearities `γ` and the flux law `ρ_p`.
//!
//! Every [`Nonlinearity`] is continuous, strictly increasing, onto `ℝ` and
//! vanishes at zero. Alongside `γ` we expose its inverse, the primitive
//! `j(r) = ∫_0^r γ` and the convex conjugate `j*`, which is the energy density
//! of the evolution problem.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NonlinearityError {
    #[error("power exponent m must be positive and finite, got {0}")]
    InvalidExponent(f64),
    #[error("table needs at least two points")]
    TooFewPoints,
    #[error("table abscissae and values must be strictly increasing (point {0})")]
    NotIncreasing(usize),
    #[error("table must vanish at zero, interpolated value is {0}")]
    NonzeroAtOrigin(f64),
    #[error("table entries must be finite")]
    NonFinite,
}

/// A continuous, strictly increasing, surjective `γ` with `γ(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    Identity,
    /// `γ(r) = |r|^{m-1} r`.
    Power { m: f64 },
    /// Piecewise linear interpolation of the breakpoints, extended linearly
    /// beyond the first and last point with the end slopes.
    Table(PiecewiseLinear),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    r: Vec<f64>,
    s: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(points: &[(f64, f64)]) -> Result<Self, NonlinearityError> {
        if points.len() < 2 {
            return Err(NonlinearityError::TooFewPoints);
        }
        if points.iter().any(|(r, s)| !r.is_finite() || !s.is_finite()) {
            return Err(NonlinearityError::NonFinite);
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return Err(NonlinearityError::NotIncreasing(i + 1));
            }
        }
        let table = PiecewiseLinear {
            r: points.iter().map(|p| p.0).collect(),
            s: points.iter().map(|p| p.1).collect(),
        };
        let at_zero = table.eval(0.0);
        if at_zero.abs() > 1e-14 {
            return Err(NonlinearityError::NonzeroAtOrigin(at_zero));
        }
        Ok(table)
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.r.iter().copied().zip(self.s.iter().copied())
    }

    // Index of the linear piece containing `x` in the knot vector `knots`;
    // pieces 0 and n-2 extend to infinity.
    fn piece(knots: &[f64], x: f64) -> usize {
        let n = knots.len();
        match knots.partition_point(|&k| k <= x) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    fn slope(&self, i: usize) -> f64 {
        (self.s[i + 1] - self.s[i]) / (self.r[i + 1] - self.r[i])
    }

    fn eval(&self, r: f64) -> f64 {
        let i = Self::piece(&self.r, r);
        self.s[i] + self.slope(i) * (r - self.r[i])
    }

    fn inverse(&self, s: f64) -> f64 {
        let i = Self::piece(&self.s, s);
        self.r[i] + (s - self.s[i]) / self.slope(i)
    }

    fn derivative(&self, r: f64) -> f64 {
        self.slope(Self::piece(&self.r, r))
    }

    /// Exact integral of the interpolant over `[0, r]`.
    fn primitive(&self, r: f64) -> f64 {
        let (lo, hi) = if r >= 0.0 { (0.0, r) } else { (r, 0.0) };
        let mut nodes = vec![lo];
        nodes.extend(self.r.iter().copied().filter(|&k| k > lo && k < hi));
        nodes.push(hi);
        let total: f64 = nodes
            .windows(2)
            .map(|w| 0.5 * (self.eval(w[0]) + self.eval(w[1])) * (w[1] - w[0]))
            .sum();
        if r >= 0.0 {
            total
        } else {
            -total
        }
    }
}

impl Nonlinearity {
    pub fn power(m: f64) -> Result<Self, NonlinearityError> {
        if !(m.is_finite() && m > 0.0) {
            return Err(NonlinearityError::InvalidExponent(m));
        }
        Ok(Nonlinearity::Power { m })
    }

    pub fn table(points: &[(f64, f64)]) -> Result<Self, NonlinearityError> {
        Ok(Nonlinearity::Table(PiecewiseLinear::new(points)?))
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Nonlinearity::Identity => r,
            Nonlinearity::Power { m } => signed_pow(r, *m),
            Nonlinearity::Table(t) => t.eval(r),
        }
    }

    pub fn inverse(&self, s: f64) -> f64 {
        match self {
            Nonlinearity::Identity => s,
            Nonlinearity::Power { m } => signed_pow(s, 1.0 / m),
            Nonlinearity::Table(t) => t.inverse(s),
        }
    }

    /// Derivative `γ'(r)`; may be `0` or `+∞` at the origin for powers.
    pub fn derivative(&self, r: f64) -> f64 {
        match self {
            Nonlinearity::Identity => 1.0,
            Nonlinearity::Power { m } => {
                if *m == 1.0 {
                    1.0
                } else {
                    m * r.abs().powf(m - 1.0)
                }
            }
            Nonlinearity::Table(t) => t.derivative(r),
        }
    }

    /// `j(r) = ∫_0^r γ(s) ds`.
    pub fn primitive(&self, r: f64) -> f64 {
        match self {
            Nonlinearity::Identity => 0.5 * r * r,
            Nonlinearity::Power { m } => r.abs().powf(m + 1.0) / (m + 1.0),
            Nonlinearity::Table(t) => t.primitive(r),
        }
    }

    /// Legendre transform `j*(s) = s γ⁻¹(s) − j(γ⁻¹(s))`.
    pub fn conjugate(&self, s: f64) -> f64 {
        match self {
            Nonlinearity::Identity => 0.5 * s * s,
            Nonlinearity::Power { m } => m / (m + 1.0) * s.abs().powf((m + 1.0) / m),
            Nonlinearity::Table(_) => {
                let r = self.inverse(s);
                s * r - self.primitive(r)
            }
        }
    }

    /// Returns `(j(r), j*(s))`.
    pub fn j_and_jstar(&self, r: f64, s: f64) -> (f64, f64) {
        (self.primitive(r), self.conjugate(s))
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Nonlinearity::Identity)
            || matches!(self, Nonlinearity::Power { m } if *m == 1.0)
    }
}

fn signed_pow(r: f64, m: f64) -> f64 {
    if m == 1.0 || r == 0.0 {
        r
    } else {
        r.signum() * r.abs().powf(m)
    }
}

/// Regularised flux law `ρ_{p,ε}(s) = (s² + ε²)^{(p−2)/2} s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxLaw {
    pub p: f64,
    pub eps: f64,
}

impl FluxLaw {
    pub fn new(p: f64, eps: f64) -> Self {
        Self { p, eps }
    }

    pub fn exact(p: f64) -> Self {
        Self { p, eps: 0.0 }
    }

    pub fn rho(&self, s: f64) -> f64 {
        let p = self.p;
        if p == 2.0 {
            return s;
        }
        if self.eps == 0.0 {
            if s == 0.0 {
                return 0.0;
            }
            return s.abs().powf(p - 2.0) * s;
        }
        (s * s + self.eps * self.eps).powf(0.5 * (p - 2.0)) * s
    }

    /// `ρ'(s) = (s² + ε²)^{(p−4)/2} ((p−1)s² + ε²)`.
    pub fn rho_prime(&self, s: f64) -> f64 {
        let p = self.p;
        if p == 2.0 {
            return 1.0;
        }
        let e2 = self.eps * self.eps;
        let s2 = s * s;
        if e2 == 0.0 {
            // Equals (p−1)|s|^{p−2}; infinite or zero at the origin.
            return (p - 1.0) * s.abs().powf(p - 2.0);
        }
        (s2 + e2).powf(0.5 * (p - 4.0)) * ((p - 1.0) * s2 + e2)
    }

    /// `∫_0^s ρ`, equal to `|s|^p / p` without regularisation.
    pub fn energy(&self, s: f64) -> f64 {
        if self.eps == 0.0 || self.p == 2.0 {
            return s.abs().powf(self.p) / self.p;
        }
        let e2 = self.eps * self.eps;
        ((s * s + e2).powf(0.5 * self.p) - e2.powf(0.5 * self.p)) / self.p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all_kinds() -> Vec<Nonlinearity> {
        vec![
            Nonlinearity::Identity,
            Nonlinearity::power(0.5).unwrap(),
            Nonlinearity::power(2.0).unwrap(),
            Nonlinearity::power(3.0).unwrap(),
            Nonlinearity::table(&[(-1.0, -2.0), (0.0, 0.0), (2.0, 1.0)]).unwrap(),
            Nonlinearity::table(&[(-3.0, -1.0), (-0.5, -0.25), (1.0, 0.5), (4.0, 7.0)]).unwrap(),
        ]
    }

    #[test]
    fn power_and_identity_examples() {
        let g = Nonlinearity::power(2.0).unwrap();
        assert_eq!(g.eval(3.0), 9.0);
        assert_eq!(g.inverse(9.0), 3.0);
        assert_eq!(g.eval(-3.0), -9.0);
        let id = Nonlinearity::Identity;
        assert_eq!(id.eval(1.25), 1.25);
        assert_eq!(id.inverse(-4.0), -4.0);
    }

    #[test]
    fn table_interpolates_and_inverts() {
        let g = Nonlinearity::table(&[(-1.0, -2.0), (0.0, 0.0), (2.0, 1.0)]).unwrap();
        assert_eq!(g.eval(1.0), 0.5);
        assert_eq!(g.inverse(0.5), 1.0);
        // Linear extension with the end slopes.
        assert_eq!(g.eval(4.0), 2.0);
        assert_eq!(g.eval(-2.0), -4.0);
        assert_eq!(g.inverse(-4.0), -2.0);
        // j over [0,1] of s = r/2 is 1/4; over [-1, 0] of 2r is 1.
        assert!((g.primitive(1.0) - 0.25).abs() < 1e-15);
        assert!((g.primitive(-1.0) - 1.0).abs() < 1e-15);
        assert!((g.primitive(3.0) - 2.25).abs() < 1e-14);
    }

    #[test]
    fn table_validation() {
        assert!(matches!(
            Nonlinearity::table(&[(0.0, 0.0)]),
            Err(NonlinearityError::TooFewPoints)
        ));
        assert!(matches!(
            Nonlinearity::table(&[(-1.0, -1.0), (1.0, -2.0)]),
            Err(NonlinearityError::NotIncreasing(1))
        ));
        assert!(matches!(
            Nonlinearity::table(&[(-1.0, 0.0), (1.0, 2.0)]),
            Err(NonlinearityError::NonzeroAtOrigin(_))
        ));
        assert!(Nonlinearity::power(-1.0).is_err());
        assert!(Nonlinearity::power(0.0).is_err());
    }

    #[test]
    fn conjugate_examples() {
        let id = Nonlinearity::power(1.0).unwrap();
        assert!((id.conjugate(3.0) - 4.5).abs() < 1e-15);
        let cube = Nonlinearity::power(3.0).unwrap();
        let (j, js) = cube.j_and_jstar(2.0, 8.0);
        assert!((j - 4.0).abs() < 1e-12);
        assert!((js - 12.0).abs() < 1e-12);
        assert!((j + js - 16.0).abs() < 1e-12);
        for g in all_kinds() {
            assert_eq!(g.conjugate(0.0), 0.0);
        }
    }

    /// Oracle: brute-force supremum of `r s − j(r)` over a fine r-grid.
    fn numeric_legendre(g: &Nonlinearity, s: f64) -> f64 {
        let n = 400_000;
        let (lo, hi) = (-10.0, 10.0);
        (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .map(|r| r * s - g.primitive(r))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn conjugate_matches_brute_force_sup() {
        let cube = Nonlinearity::power(3.0).unwrap();
        let brute = numeric_legendre(&cube, 8.0);
        assert!((brute - 12.0).abs() < 1e-6, "{brute}");
        for g in all_kinds() {
            for &s in &[-1.5, -0.3, 0.7, 2.0] {
                let brute = numeric_legendre(&g, s);
                assert!(
                    (brute - g.conjugate(s)).abs() < 1e-6,
                    "{g:?} s={s}: {brute} vs {}",
                    g.conjugate(s)
                );
            }
        }
    }

    #[test]
    fn flux_law_examples() {
        for eps in [0.0, 1e-3, 0.5] {
            let law = FluxLaw::new(2.0, eps);
            assert_eq!(law.rho(1.7), 1.7);
            assert_eq!(law.rho_prime(-3.0), 1.0);
        }
        assert_eq!(FluxLaw::exact(3.0).rho(-2.0), -4.0);
        let singular = FluxLaw::new(1.5, 1e-3);
        assert_eq!(singular.rho(0.0), 0.0);
        let expected = (1e-3f64).powf(-0.5);
        assert!((singular.rho_prime(0.0) - expected).abs() < 1e-9 * expected);
        assert!((singular.rho_prime(0.0) - 31.6228).abs() < 1e-4);
    }

    #[test]
    fn inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for g in all_kinds() {
            for _ in 0..2000 {
                let r: f64 = rng.random_range(-20.0..20.0);
                let back = g.inverse(g.eval(r));
                assert!((back - r).abs() <= 1e-10 * (1.0 + r.abs()), "{g:?} {r} {back}");
            }
        }
    }

    #[test]
    fn monotone_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let laws = [
            FluxLaw::new(1.5, 0.0),
            FluxLaw::new(1.5, 1e-4),
            FluxLaw::new(3.0, 0.0),
            FluxLaw::new(4.0, 1e-2),
        ];
        for _ in 0..10_000 {
            let a: f64 = rng.random_range(-5.0..5.0);
            let b: f64 = rng.random_range(-5.0..5.0);
            for g in all_kinds() {
                assert!((g.eval(a) - g.eval(b)) * (a - b) >= 0.0);
            }
            for law in &laws {
                assert!((law.rho(a) - law.rho(b)) * (a - b) >= 0.0);
            }
        }
    }

    #[test]
    fn fenchel_young() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for g in all_kinds() {
            for _ in 0..2000 {
                let r: f64 = rng.random_range(-4.0..4.0);
                let s: f64 = rng.random_range(-4.0..4.0);
                let (j, js) = g.j_and_jstar(r, s);
                let scale = 1.0 + (r * s).abs() + j + js;
                assert!(j + js >= r * s - 1e-9 * scale);
                let gs = g.eval(r);
                let eq = g.primitive(r) + g.conjugate(gs) - r * gs;
                assert!(eq.abs() <= 1e-9 * (1.0 + (r * gs).abs()), "{g:?} r={r}: {eq}");
            }
        }
    }

    #[test]
    fn rho_prime_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for &(p, eps) in &[(1.5, 1e-3), (3.0, 1e-2), (4.0, 1e-1), (1.2, 0.5)] {
            let law = FluxLaw::new(p, eps);
            for _ in 0..500 {
                let s: f64 = rng.random_range(0.05..4.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
                let h = 1e-6 * s.abs().max(1e-3);
                let fd = (law.rho(s + h) - law.rho(s - h)) / (2.0 * h);
                let exact = law.rho_prime(s);
                assert!((fd - exact).abs() <= 1e-6 * exact.abs(), "p={p} s={s}");
            }
        }
    }

    proptest! {
        #[test]
        fn odd_symmetry(s in -50.0f64..50.0, m in 0.1f64..5.0, p in 1.1f64..6.0, eps in 0.0f64..1.0) {
            let g = Nonlinearity::Power { m };
            prop_assert_eq!(g.eval(-s), -g.eval(s));
            let law = FluxLaw::new(p, eps);
            prop_assert_eq!(law.rho(-s), -law.rho(s));
        }
    }
}
