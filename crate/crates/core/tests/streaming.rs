use neurde::grid::Grid;
use neurde::lattice::{CX, CY, Q};
use neurde::population::{PopulationGrid, Species};
use neurde::streaming::stream;
use proptest::prelude::*;

/// Depthwise 3x3 convolution with one-hot kernels, circular padding.
fn conv_oracle(pop: &PopulationGrid) -> PopulationGrid {
    let (nx, ny) = (pop.nx(), pop.ny());
    let mut out = PopulationGrid::zeros(nx, ny, pop.species());
    for i in 0..Q {
        let mut k = [[0.0f64; 3]; 3];
        k[(1.0 - CY[i]) as usize][(1.0 - CX[i]) as usize] = 1.0;
        for y in 0..ny {
            for x in 0..nx {
                let mut acc = 0.0;
                for (ky, row) in k.iter().enumerate() {
                    for (kx, w) in row.iter().enumerate() {
                        acc += w * pop.get((x + nx + kx - 1) % nx, (y + ny + ky - 1) % ny, i);
                    }
                }
                out.set(x, y, i, acc);
            }
        }
    }
    out
}

fn field(nx: usize, ny: usize) -> impl Strategy<Value = PopulationGrid> {
    prop::collection::vec(0.0f64..1.0, nx * ny * Q)
        .prop_map(move |v| PopulationGrid::from_vec(nx, ny, Species::F, v).unwrap())
}

proptest! {
    #[test]
    fn matches_convolution_bit_for_bit(pop in (2usize..9, 2usize..9).prop_flat_map(|(nx, ny)| field(nx, ny))) {
        let grid = Grid::periodic(pop.nx(), pop.ny()).unwrap();
        let a = stream(&pop, &grid);
        let b = conv_oracle(&pop);
        prop_assert!(a.as_slice().iter().zip(b.as_slice()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn periodic_streaming_permutes_values(pop in field(8, 8)) {
        let grid = Grid::periodic(8, 8).unwrap();
        let out = stream(&pop, &grid);
        for i in 0..Q {
            let mut a: Vec<f64> = (0..64).map(|c| pop.cell(c)[i]).collect();
            let mut b: Vec<f64> = (0..64).map(|c| out.cell(c)[i]).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
        }
    }
}

#[test]
fn single_particle_moves_one_cell() {
    let grid = Grid::periodic(3, 3).unwrap();
    let mut pop = PopulationGrid::zeros(3, 3, Species::F);
    pop.set(1, 1, 1, 1.0);
    let out = stream(&pop, &grid);
    for c in 0..9 {
        for i in 0..Q {
            let expect = if c == 5 && i == 1 { 1.0 } else { 0.0 };
            assert_eq!(out.cell(c)[i], expect, "cell {c} channel {i}");
        }
    }
}

#[test]
fn wraps_around_periodic_edges() {
    let grid = Grid::periodic(4, 3).unwrap();
    let mut pop = PopulationGrid::zeros(4, 3, Species::G);
    pop.set(3, 2, 5, 2.5);
    let out = stream(&pop, &grid);
    assert_eq!(out.get(0, 0, 5), 2.5);
    assert_eq!(out.as_slice().iter().sum::<f64>(), 2.5);
}

#[test]
fn rest_channel_is_untouched() {
    let grid = Grid::periodic(5, 4).unwrap();
    let data: Vec<f64> = (0..5 * 4 * Q).map(|k| k as f64 * 0.37).collect();
    let pop = PopulationGrid::from_vec(5, 4, Species::F, data).unwrap();
    let out = stream(&pop, &grid);
    for c in 0..20 {
        assert_eq!(out.cell(c)[0], pop.cell(c)[0]);
    }
}
