//! Energy equilibria from the three closures side by side.
//!
//! For a handful of states this prints `g_eq` from the polynomial expansion
//! and from the Newton moment solve, the Newton iteration count, and how far
//! each reproduces the targets `sum g_eq = 2 rho E` and `sum c g_eq = q`.
//! The polynomial form turns negative once `|u|` gets large compared with
//! `sqrt(T)`.
//!
//! ```text
//! cargo run --release --example closures
//! ```

use neurde::closures::{energy_targets, feq_extended, geq_newton, geq_poly_raw, NewtonSettings};
use neurde::lattice::{CX, CY, Q};
use neurde::moments::{GasParams, MacroState};

fn residual(g: &[f64; Q], s: &MacroState) -> f64 {
    let (m0, q) = energy_targets(s);
    let sum: f64 = g.iter().sum();
    let qx: f64 = g.iter().zip(CX).map(|(a, c)| a * c).sum();
    let qy: f64 = g.iter().zip(CY).map(|(a, c)| a * c).sum();
    (sum - m0).abs().max((qx - q[0]).abs()).max((qy - q[1]).abs())
}

fn show(label: &str, g: &[f64; Q]) {
    let cells: Vec<String> = g.iter().map(|v| format!("{v:+.4e}")).collect();
    println!("  {label:<8} {}", cells.join(" "));
}

fn main() -> neurde::Result<()> {
    let gas = GasParams::new(1.4, 0.71, 0.01)?;
    let settings = NewtonSettings::default();
    let states = [
        ("rest", MacroState::new(1.0, 0.0, 0.0, 1.0 / 3.0, &gas)),
        ("slow", MacroState::new(1.0, 0.05, -0.02, 0.3, &gas)),
        ("cold", MacroState::new(0.8, 0.1, 0.0, 0.05, &gas)),
        ("fast", MacroState::new(0.125, 0.6, 0.0, 0.12, &gas)),
    ];
    for (name, s) in states {
        println!("{name}: rho {} u ({}, {}) T {}", s.rho, s.ux, s.uy, s.t);
        if let Ok(f) = feq_extended(&s) {
            show("f_eq", &f);
        }
        let poly = geq_poly_raw(&s);
        show("poly", &poly);
        let newton = geq_newton(&s, &settings, None)?;
        show("newton", &newton.geq);
        println!(
            "  moment residual: poly {:.2e}, newton {:.2e} after {} iterations; poly min {:+.3e}",
            residual(&poly, &s),
            residual(&newton.geq, &s),
            newton.iterations,
            poly.iter().cloned().fold(f64::INFINITY, f64::min)
        );
    }
    Ok(())
}
