//! Macroscopic observables, temperature-dependent weights and the closed-form
//! Maxwellian moments used by the energy closures.

use crate::error::{Error, Result, NO_CELL};
use crate::lattice::{CX, CY, Q, VELOCITIES};
use crate::real::Real;

/// Gas and transport constants. All experiments use `R = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasParams {
    pub gamma: f64,
    pub prandtl: f64,
    pub r: f64,
    /// Dynamic viscosity in lattice units.
    pub mu: f64,
    /// Lattice-frame velocity is the physical velocity minus this shift.
    pub u_shift: [f64; 2],
    /// Optional floor on both relaxation times (off by default).
    pub tau_min: Option<f64>,
}

impl GasParams {
    pub fn new(gamma: f64, prandtl: f64, mu: f64) -> Result<Self> {
        let gas = GasParams {
            gamma,
            prandtl,
            r: 1.0,
            mu,
            u_shift: [0.0, 0.0],
            tau_min: None,
        };
        gas.validate()?;
        Ok(gas)
    }

    pub fn with_shift(mut self, u_shift: [f64; 2]) -> Self {
        self.u_shift = u_shift;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0) {
            return Err(Error::Config(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.prandtl > 0.0) {
            return Err(Error::Config(format!("Prandtl number must be positive, got {}", self.prandtl)));
        }
        if !(self.r > 0.0) {
            return Err(Error::Config(format!("gas constant must be positive, got {}", self.r)));
        }
        if !(self.mu > 0.0) {
            return Err(Error::Config(format!("viscosity must be positive, got {}", self.mu)));
        }
        if let Some(t) = self.tau_min {
            if !(t > 0.5) {
                return Err(Error::Config(format!("tau_min must exceed 1/2, got {t}")));
            }
        }
        Ok(())
    }

    pub fn cv(&self) -> f64 {
        self.r / (self.gamma - 1.0)
    }

    pub fn cp(&self) -> f64 {
        self.gamma * self.cv()
    }

    /// Thermal conductivity, `C_p mu / Pr`.
    pub fn kappa(&self) -> f64 {
        self.cp() * self.mu / self.prandtl
    }
}

/// Per-cell observables. `e` is the total specific energy, `C_v T + |u|^2/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroState<T = f64> {
    pub rho: T,
    pub ux: T,
    pub uy: T,
    pub t: T,
    pub e: T,
}

impl MacroState<f64> {
    /// Builds a state from primitive variables, deriving `E`.
    pub fn new(rho: f64, ux: f64, uy: f64, t: f64, gas: &GasParams) -> Self {
        MacroState {
            rho,
            ux,
            uy,
            t,
            e: gas.cv() * t + 0.5 * (ux * ux + uy * uy),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rho.is_finite() || !self.ux.is_finite() || !self.uy.is_finite() || !self.t.is_finite() {
            return Err(Error::NonFinite { cell: NO_CELL });
        }
        if self.rho <= 0.0 {
            return Err(Error::NegativeDensity { value: self.rho, cell: NO_CELL });
        }
        if self.t <= 0.0 {
            return Err(Error::NegativeTemperature { value: self.t, cell: NO_CELL });
        }
        Ok(())
    }

    pub fn pressure(&self, gas: &GasParams) -> f64 {
        gas.r * self.rho * self.t
    }

    pub fn speed(&self) -> f64 {
        (self.ux * self.ux + self.uy * self.uy).sqrt()
    }

    /// Network input vector `(rho, ux, uy, T)`.
    pub fn features(&self) -> [f64; 4] {
        [self.rho, self.ux, self.uy, self.t]
    }

    /// Adds `shift` to the velocity, keeping `T` and recomputing `E`.
    pub fn shifted(&self, shift: [f64; 2], gas: &GasParams) -> Self {
        MacroState::new(self.rho, self.ux + shift[0], self.uy + shift[1], self.t, gas)
    }
}

/// 1D weight factors `(W_0, W_+1, W_-1)`.
#[inline]
pub fn weight_factors<T: Real>(t: T) -> [T; 3] {
    let half = t * 0.5;
    [t.rsub(1.0), half, half]
}

#[inline]
fn axis_slot(c: i32) -> usize {
    match c {
        0 => 0,
        1 => 1,
        _ => 2,
    }
}

/// Product weights without the range check.
pub fn weights_unchecked<T: Real>(t: T) -> [T; Q] {
    let w = weight_factors(t);
    let mut out = [t; Q];
    for (i, c) in VELOCITIES.iter().enumerate() {
        out[i] = w[axis_slot(c[0])] * w[axis_slot(c[1])];
    }
    out
}

/// Temperature-dependent lattice weights; `T` must lie in `(0, 1)`.
pub fn weights(t: f64) -> Result<[f64; Q]> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::LatticeRange { value: t, cell: NO_CELL });
    }
    Ok(weights_unchecked(t))
}

/// Raw moment sums, no validity checks.
pub fn project_raw<T: Real>(f: &[T; Q], g: &[T; Q], cv: f64) -> MacroState<T> {
    let mut rho = f[0];
    let mut jx = f[0] * 0.0;
    let mut jy = jx;
    let mut eg = g[0];
    for i in 1..Q {
        rho = rho + f[i];
        jx = jx + f[i] * CX[i];
        jy = jy + f[i] * CY[i];
        eg = eg + g[i];
    }
    let inv = rho.recip();
    let ux = jx * inv;
    let uy = jy * inv;
    let e = eg * inv * 0.5;
    let t = (e - (ux * ux + uy * uy) * 0.5) / cv;
    MacroState { rho, ux, uy, t, e }
}

/// Moment projection of one cell.
pub fn project(f: &[f64; Q], g: &[f64; Q], gas: &GasParams) -> Result<MacroState> {
    let s = project_raw(f, g, gas.cv());
    if !(s.rho > 0.0) {
        if s.rho.is_nan() {
            return Err(Error::NonFinite { cell: NO_CELL });
        }
        return Err(Error::NegativeDensity { value: s.rho, cell: NO_CELL });
    }
    if !(s.t > 0.0) {
        if !s.t.is_finite() {
            return Err(Error::NonFinite { cell: NO_CELL });
        }
        return Err(Error::NegativeTemperature { value: s.t, cell: NO_CELL });
    }
    if !s.ux.is_finite() || !s.uy.is_finite() {
        return Err(Error::NonFinite { cell: NO_CELL });
    }
    Ok(s)
}

/// Second moment `sum_i c_i c_i f_i` as `[[xx, xy], [xy, yy]]`.
pub fn second_moment<T: Real>(f: &[T; Q]) -> [[T; 2]; 2] {
    let zero = f[0] * 0.0;
    let (mut xx, mut xy, mut yy) = (zero, zero, zero);
    for i in 1..Q {
        xx = xx + f[i] * (CX[i] * CX[i]);
        xy = xy + f[i] * (CX[i] * CY[i]);
        yy = yy + f[i] * (CY[i] * CY[i]);
    }
    [[xx, xy], [xy, yy]]
}

/// Equilibrium pressure tensor `rho (u u + T I)`.
pub fn pressure_tensor_eq<T: Real>(s: &MacroState<T>) -> [[T; 2]; 2] {
    let xy = s.rho * s.ux * s.uy;
    [
        [s.rho * (s.ux * s.ux + s.t), xy],
        [xy, s.rho * (s.uy * s.uy + s.t)],
    ]
}

/// Maxwellian heat flux, pressure tensor and contracted fourth moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HigherMoments<T = f64> {
    pub q: [T; 2],
    pub p: [[T; 2]; 2],
    pub r: [[T; 2]; 2],
}

pub fn maxwellian_higher_moments<T: Real>(s: &MacroState<T>) -> HigherMoments<T> {
    let u = [s.ux, s.uy];
    let q = [
        s.rho * s.ux * (s.e + s.t) * 2.0,
        s.rho * s.uy * (s.e + s.t) * 2.0,
    ];
    let p = pressure_tensor_eq(s);
    let two_rho_e = s.rho * s.e * 2.0;
    let two_rho_t = s.rho * s.t * 2.0;
    let mut r = [[s.rho; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let uu = u[a] * u[b];
            let (d1, d2) = if a == b {
                (s.t + uu, s.t + uu * 2.0)
            } else {
                (uu, uu * 2.0)
            };
            r[a][b] = two_rho_e * d1 + two_rho_t * d2;
        }
    }
    HigherMoments { q, p, r }
}

/// `(tau_1, tau_2)` from the viscosity definition, with the optional floor.
pub fn relaxation_times<T: Real>(s: &MacroState<T>, gas: &GasParams) -> (T, T) {
    let inv_rt = (s.rho * s.t).recip();
    let mut tau1 = inv_rt * gas.mu + 0.5;
    let mut tau2 = inv_rt * (gas.mu / gas.prandtl) + 0.5;
    if let Some(floor) = gas.tau_min {
        if tau1.value() < floor {
            tau1 = tau1 * 0.0 + floor;
        }
        if tau2.value() < floor {
            tau2 = tau2 * 0.0 + floor;
        }
    }
    (tau1, tau2)
}

/// Local Mach number `|u| / sqrt(gamma R T)`.
pub fn local_mach(s: &MacroState, gas: &GasParams) -> f64 {
    s.speed() / (gas.gamma * gas.r * s.t).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gas_cv1() -> GasParams {
        GasParams::new(2.0, 0.71, 1e-4).unwrap()
    }

    #[test]
    fn rest_only_projection() {
        let mut f = [0.0; Q];
        let mut g = [0.0; Q];
        f[0] = 2.0;
        g[0] = 1.6;
        let s = project(&f, &g, &gas_cv1()).unwrap();
        assert_eq!((s.rho, s.ux, s.uy), (2.0, 0.0, 0.0));
        assert!((s.e - 0.4).abs() < 1e-15);
        assert!((s.t - 0.4).abs() < 1e-15);
    }

    #[test]
    fn two_channel_velocity() {
        let mut f = [0.0; Q];
        f[1] = 0.6;
        f[2] = 0.4;
        let mut g = [0.0; Q];
        g[0] = 1.0;
        let s = project(&f, &g, &gas_cv1()).unwrap();
        assert!((s.rho - 1.0).abs() < 1e-15);
        assert!((s.ux - 0.2).abs() < 1e-15);
        assert_eq!(s.uy, 0.0);
    }

    #[test]
    fn projection_errors() {
        let f = [0.0; Q];
        let g = [0.1; Q];
        assert!(matches!(
            project(&f, &g, &gas_cv1()),
            Err(Error::NegativeDensity { .. })
        ));
        let mut f = [0.0; Q];
        f[1] = 1.0;
        let g = [0.0; Q];
        assert!(matches!(
            project(&f, &g, &gas_cv1()),
            Err(Error::NegativeTemperature { .. })
        ));
    }

    #[test]
    fn weights_at_0_2() {
        let w = weights(0.2).unwrap();
        assert!((w[0] - 0.64).abs() < 1e-15);
        for i in 1..5 {
            assert!((w[i] - 0.08).abs() < 1e-15);
        }
        for i in 5..9 {
            assert!((w[i] - 0.01).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_at_one_third_match_product_loop() {
        let t = 1.0 / 3.0;
        let w = weights(t).unwrap();
        for (i, c) in VELOCITIES.iter().enumerate() {
            let mut prod = 1.0;
            for &ca in c {
                prod *= if ca == 0 { 1.0 - t } else { t / 2.0 };
            }
            assert_eq!(w[i], prod);
        }
        assert!((w[0] - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn weights_out_of_range() {
        for t in [0.0, -0.1, 1.0, 1.5, f64::NAN] {
            assert!(matches!(weights(t), Err(Error::LatticeRange { .. })));
        }
    }

    #[test]
    fn heat_flux_example() {
        let gas = gas_cv1();
        let s = MacroState::new(1.0, 0.1, 0.0, 0.2, &gas);
        assert!((s.e - 0.205).abs() < 1e-15);
        let m = maxwellian_higher_moments(&s);
        assert!((m.q[0] - 0.081).abs() < 1e-15);
        assert_eq!(m.q[1], 0.0);
    }

    #[test]
    fn rest_state_moments() {
        let gas = GasParams::new(1.4, 0.71, 0.01).unwrap();
        let s = MacroState::new(1.3, 0.0, 0.0, 0.25, &gas);
        let m = maxwellian_higher_moments(&s);
        assert_eq!(m.q, [0.0, 0.0]);
        assert_eq!(m.p, [[1.3 * 0.25, 0.0], [0.0, 1.3 * 0.25]]);
    }

    #[test]
    fn higher_moments_second_implementation() {
        let gas = GasParams::new(1.4, 0.71, 0.01).unwrap();
        let (rho, u, t) = (2.0, [0.1, -0.2], 0.3);
        let s = MacroState::new(rho, u[0], u[1], t, &gas);
        let m = maxwellian_higher_moments(&s);
        let e = gas.cv() * t + 0.5 * (u[0] * u[0] + u[1] * u[1]);
        for a in 0..2 {
            assert!((m.q[a] - 2.0 * rho * u[a] * (e + t)).abs() < 1e-14);
            for b in 0..2 {
                let d = if a == b { 1.0 } else { 0.0 };
                let p = rho * u[a] * u[b] + rho * t * d;
                let r = 2.0 * rho * e * (t * d + u[a] * u[b]) + 2.0 * rho * t * (t * d + 2.0 * u[a] * u[b]);
                assert!((m.p[a][b] - p).abs() < 1e-14);
                assert!((m.r[a][b] - r).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn relaxation_examples() {
        let gas = GasParams::new(1.4, 0.71, 1e-4).unwrap();
        let s = MacroState::new(1.0, 0.0, 0.0, 0.2, &gas);
        let (t1, _) = relaxation_times(&s, &gas);
        assert!((t1 - 0.5005).abs() < 1e-15);

        let gas1 = GasParams::new(1.4, 1.0, 0.03).unwrap();
        let s = MacroState::new(0.7, 0.1, 0.0, 0.3, &gas1);
        let (a, b) = relaxation_times(&s, &gas1);
        assert_eq!(a, b);

        let gas = GasParams::new(1.4, 0.71, 0.025).unwrap();
        let s = MacroState::new(0.5, 0.0, 0.0, 0.2, &gas);
        let (_, t2) = relaxation_times(&s, &gas);
        let via_kappa = gas.kappa() / (gas.cp() * s.rho * s.t) + 0.5;
        assert!((t2 - via_kappa).abs() < 1e-14);
    }

    #[test]
    fn mach_examples() {
        let gas = GasParams::new(1.4, 0.71, 0.01).unwrap();
        let s = MacroState::new(1.0, 0.6, 0.0, 0.2, &gas);
        assert!((local_mach(&s, &gas) - 1.1339).abs() < 1e-4);
        let s = MacroState::new(1.0, 0.0, 0.0, 0.2, &gas);
        assert_eq!(local_mach(&s, &gas), 0.0);
        let u = 1.8 * (1.4f64 * 0.2).sqrt();
        let s = MacroState::new(1.0, u, 0.0, 0.2, &gas);
        assert!((local_mach(&s, &gas) - 1.8).abs() < 1e-12);
    }

    #[test]
    fn weights_sum_to_one_on_many_temperatures() {
        for k in 0..1000 {
            let t = 0.01 + 0.98 * (k as f64 + 0.5) / 1000.0;
            let s: f64 = weights(t).unwrap().iter().sum();
            assert!((s - 1.0).abs() <= 1e-14);
        }
    }

    proptest! {
        #[test]
        fn projection_matches_literal_sums(f in proptest::array::uniform9(0.01f64..2.0),
                                           g in proptest::array::uniform9(0.01f64..2.0)) {
            let gas = GasParams::new(1.4, 0.71, 0.01).unwrap();
            let s = project_raw(&f, &g, gas.cv());
            let mut rho = 0.0;
            let mut j = [0.0, 0.0];
            let mut eg = 0.0;
            for (i, c) in VELOCITIES.iter().enumerate() {
                rho += f[i];
                j[0] += c[0] as f64 * f[i];
                j[1] += c[1] as f64 * f[i];
                eg += g[i];
            }
            prop_assert!((s.rho - rho).abs() < 1e-13);
            prop_assert!((s.ux - j[0] / rho).abs() < 1e-13);
            prop_assert!((s.uy - j[1] / rho).abs() < 1e-13);
            prop_assert!((s.e - eg / (2.0 * rho)).abs() < 1e-13);
        }

        #[test]
        fn relaxation_times_exceed_half(rho in 0.01f64..5.0, t in 0.01f64..0.99, mu in 1e-6f64..1.0) {
            let gas = GasParams::new(1.4, 0.71, mu).unwrap();
            let s = MacroState::new(rho, 0.0, 0.0, t, &gas);
            let (a, b) = relaxation_times(&s, &gas);
            prop_assert!(a > 0.5 && b > 0.5);
        }

        #[test]
        fn internal_energy_positive(rho in 0.01f64..5.0, ux in -1.0f64..1.0, uy in -1.0f64..1.0, t in 1e-4f64..0.99) {
            let gas = GasParams::new(1.4, 0.71, 0.01).unwrap();
            let s = MacroState::new(rho, ux, uy, t, &gas);
            prop_assert!(s.e - 0.5 * (ux * ux + uy * uy) > 0.0);
        }
    }
}
