//! Small d-dimensional DFT layer over `rustfft`.
//!
//! Transforms are unnormalized: the inverse direction computes
//! `sum_k X_k exp(+2πi jk/M)` so that placing coefficients at wrapped
//! wavenumber slots and running the inverse yields plane-wave synthesis
//! without scale factors.  Plans are cached per thread.

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::cell::RefCell;
use std::sync::Arc;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

/// In-place DFT along every axis of a row-major cube with `len` points per
/// axis and `dim` axes.
pub fn dft_cube(data: &mut [Complex64], dim: usize, len: usize, direction: FftDirection) {
    debug_assert_eq!(data.len(), len.pow(dim as u32));
    let fft = plan(len, direction);
    let mut scratch = vec![Complex64::ZERO; fft.get_inplace_scratch_len()];

    for axis in 0..dim {
        let stride = len.pow((dim - 1 - axis) as u32);
        if stride == 1 {
            for lane in data.chunks_exact_mut(len) {
                fft.process_with_scratch(lane, &mut scratch);
            }
        } else {
            let block = len * stride;
            let mut lane = vec![Complex64::ZERO; len];
            for outer in 0..data.len() / block {
                for inner in 0..stride {
                    let base = outer * block + inner;
                    for (s, slot) in lane.iter_mut().enumerate() {
                        *slot = data[base + s * stride];
                    }
                    fft.process_with_scratch(&mut lane, &mut scratch);
                    for (s, value) in lane.iter().enumerate() {
                        data[base + s * stride] = *value;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_then_inverse_rescales() {
        let len = 6;
        let original: Vec<Complex64> = (0..len * len)
            .map(|i| Complex64::new(i as f64, (i * i % 7) as f64))
            .collect();
        let mut data = original.clone();
        dft_cube(&mut data, 2, len, FftDirection::Forward);
        dft_cube(&mut data, 2, len, FftDirection::Inverse);
        let scale = (len * len) as f64;
        for (a, b) in data.iter().zip(&original) {
            assert!((a / scale - b).norm() < 1e-12);
        }
    }

    #[test]
    fn inverse_of_single_slot_is_plane_wave() {
        // coefficient 1 at slot k=2 of an 8-point axis: samples exp(2πi·2j/8)
        let len = 8;
        let mut data = vec![Complex64::ZERO; len];
        data[2] = Complex64::new(1.0, 0.0);
        dft_cube(&mut data, 1, len, FftDirection::Inverse);
        for (j, v) in data.iter().enumerate() {
            let phase = 2.0 * std::f64::consts::PI * 2.0 * j as f64 / len as f64;
            assert!((v - Complex64::new(phase.cos(), phase.sin())).norm() < 1e-12);
        }
    }
}
