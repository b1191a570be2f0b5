//! Sobol sequence generation in Gray-code order.
//!
//! Direction numbers come from the Joe–Kuo D(6) tables for coordinates up
//! to [`MAX_SOBOL_DIMENSION`]; the first coordinate is the van der Corput
//! sequence. The generator emits the initial zero point at index 0 and
//! supports a per-coordinate XOR digital shift for scrambling.

use super::matrix::Matrix;
use super::NumError;

/// Highest supported dimension for Sobol sampling.
pub const MAX_SOBOL_DIMENSION: usize = 21;

const BITS: usize = 32;

struct DimSpec {
    s: usize,
    a: u32,
    m: &'static [u32],
}

/// Joe–Kuo D(6) primitive polynomials and initial direction numbers for
/// coordinates 2..=21 (coordinate 1 needs none).
const DIM_SPECS: [DimSpec; 20] = [
    DimSpec { s: 1, a: 0, m: &[1] },
    DimSpec { s: 2, a: 1, m: &[1, 3] },
    DimSpec { s: 3, a: 1, m: &[1, 3, 1] },
    DimSpec { s: 3, a: 2, m: &[1, 1, 1] },
    DimSpec { s: 4, a: 1, m: &[1, 1, 3, 3] },
    DimSpec { s: 4, a: 4, m: &[1, 3, 5, 13] },
    DimSpec { s: 5, a: 2, m: &[1, 1, 5, 5, 17] },
    DimSpec { s: 5, a: 4, m: &[1, 1, 5, 5, 5] },
    DimSpec { s: 5, a: 7, m: &[1, 1, 7, 11, 19] },
    DimSpec { s: 5, a: 11, m: &[1, 1, 5, 1, 1] },
    DimSpec { s: 5, a: 13, m: &[1, 1, 1, 3, 11] },
    DimSpec { s: 5, a: 14, m: &[1, 3, 5, 5, 31] },
    DimSpec { s: 6, a: 1, m: &[1, 3, 3, 9, 7, 49] },
    DimSpec { s: 6, a: 13, m: &[1, 1, 1, 15, 21, 21] },
    DimSpec { s: 6, a: 16, m: &[1, 3, 1, 13, 27, 49] },
    DimSpec { s: 6, a: 19, m: &[1, 1, 1, 15, 7, 5] },
    DimSpec { s: 6, a: 22, m: &[1, 3, 1, 15, 13, 25] },
    DimSpec { s: 6, a: 25, m: &[1, 1, 5, 5, 19, 61] },
    DimSpec { s: 7, a: 1, m: &[1, 3, 7, 11, 23, 15, 103] },
    DimSpec { s: 7, a: 4, m: &[1, 3, 7, 13, 13, 15, 69] },
];

/// Direction numbers for 0-based coordinate `coord`, scaled to 32 bits.
fn direction_numbers(coord: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if coord == 0 {
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = 1 << (31 - i);
        }
        return v;
    }
    let spec = &DIM_SPECS[coord - 1];
    let s = spec.s;
    for i in 0..s.min(BITS) {
        v[i] = spec.m[i] << (31 - i);
    }
    for i in s..BITS {
        let mut vi = v[i - s] ^ (v[i - s] >> s);
        for k in 1..s {
            if (spec.a >> (s - 1 - k)) & 1 == 1 {
                vi ^= v[i - k];
            }
        }
        v[i] = vi;
    }
    v
}

/// First `n` Sobol points in `[0,1)^d`, XOR-shifted per coordinate.
///
/// `shift` must supply one 32-bit digital shift per coordinate; all zeros
/// reproduces the unscrambled sequence.
pub fn sobol_points(d: usize, n: usize, shift: &[u32]) -> Result<Matrix, NumError> {
    if d == 0 || d > MAX_SOBOL_DIMENSION {
        return Err(NumError::UnsupportedDimension {
            requested: d,
            max: MAX_SOBOL_DIMENSION,
        });
    }
    assert_eq!(shift.len(), d, "one digital shift per coordinate");
    assert!(n as u64 <= 1 << 31, "sequence length limited to 2^31");

    let directions: Vec<[u32; BITS]> = (0..d).map(direction_numbers).collect();
    let scale = 1.0 / (1u64 << 32) as f64;
    let mut state = vec![0u32; d];
    let mut out = Matrix::zeros(n, d);
    for i in 0..n {
        if i > 0 {
            // Gray code step: flip by the direction number indexed by the
            // lowest zero bit of i-1.
            let c = (!(i as u32 - 1)).trailing_zeros() as usize;
            for (x, dirs) in state.iter_mut().zip(&directions) {
                *x ^= dirs[c];
            }
        }
        let row = out.row_mut(i);
        for (j, (&x, &sh)) in state.iter().zip(shift).enumerate() {
            row[j] = (x ^ sh) as f64 * scale;
        }
    }
    Ok(out)
}

/// Unscrambled Sobol points (zero digital shift).
pub fn sobol_unscrambled(d: usize, n: usize) -> Result<Matrix, NumError> {
    sobol_points(d, n, &vec![0u32; d])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_prefix() {
        let pts = sobol_unscrambled(1, 4).unwrap();
        let got: Vec<f64> = (0..4).map(|i| pts[(i, 0)]).collect();
        assert_eq!(got, vec![0.0, 0.5, 0.75, 0.25]);
    }

    #[test]
    fn two_dimensional_prefix() {
        let pts = sobol_unscrambled(2, 4).unwrap();
        let expect = [(0.0, 0.0), (0.5, 0.5), (0.75, 0.25), (0.25, 0.75)];
        for (i, &(x, y)) in expect.iter().enumerate() {
            assert_eq!(pts[(i, 0)], x, "point {i} x");
            assert_eq!(pts[(i, 1)], y, "point {i} y");
        }
    }

    #[test]
    fn dimension_limit() {
        assert!(sobol_unscrambled(MAX_SOBOL_DIMENSION, 8).is_ok());
        assert!(matches!(
            sobol_unscrambled(MAX_SOBOL_DIMENSION + 1, 8),
            Err(NumError::UnsupportedDimension { .. })
        ));
    }

    #[test]
    fn dyadic_stratification_up_to_1024_points() {
        // Among the first 2^m points every dyadic interval of width 2^-k per
        // coordinate holds exactly 2^(m-k) points, for k <= m <= 10.
        for d in [1usize, 2, 5, 13, 21] {
            let pts = sobol_unscrambled(d, 1 << 10).unwrap();
            for m in 1..=10usize {
                let npts = 1usize << m;
                for k in 1..=m {
                    let bins = 1usize << k;
                    for j in 0..d {
                        let mut counts = vec![0usize; bins];
                        for i in 0..npts {
                            let cell = (pts[(i, j)] * bins as f64) as usize;
                            counts[cell.min(bins - 1)] += 1;
                        }
                        for (cell, &c) in counts.iter().enumerate() {
                            assert_eq!(
                                c,
                                1 << (m - k),
                                "d={d} coord={j} m={m} k={k} cell={cell}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn digital_shift_preserves_stratification() {
        let d = 3;
        let shift: Vec<u32> = vec![0x9ab3_11c7, 0x1234_5678, 0xcafe_f00d];
        let pts = sobol_points(d, 256, &shift).unwrap();
        for k in 1..=8usize {
            let bins = 1usize << k;
            for j in 0..d {
                let mut counts = vec![0usize; bins];
                for i in 0..256 {
                    let cell = (pts[(i, j)] * bins as f64) as usize;
                    counts[cell.min(bins - 1)] += 1;
                }
                assert!(counts.iter().all(|&c| c == 256 / bins));
            }
        }
    }
}
