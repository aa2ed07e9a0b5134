use std::sync::OnceLock;

use super::{q_quantize, QFormat};
use crate::kernels::sigmoid;

/// Recurrent gate pre-activations are rounded to this fraction length and
/// clamped to `[-8, 8)` before the sigmoid/tanh lookup.
pub const GATE_INPUT_FRAC: i32 = 8;
const GATE_INPUT_HALF: i32 = 1 << (GATE_INPUT_FRAC + 3);
/// Format of sigmoid/tanh lookup outputs.
pub const GATE_OUTPUT_FORMAT: QFormat = QFormat(7);

/// `v · 2^-shift` rounded half to even; a negative shift multiplies.
pub fn round_shift(v: i128, shift: i32) -> i128 {
    if shift <= 0 {
        return v << (-shift) as u32;
    }
    let s = shift as u32;
    if s >= 127 {
        return 0;
    }
    let floor = v >> s;
    let rem = v - (floor << s);
    let half = 1i128 << (s - 1);
    match rem.cmp(&half) {
        std::cmp::Ordering::Less => floor,
        std::cmp::Ordering::Greater => floor + 1,
        std::cmp::Ordering::Equal => floor + (floor & 1),
    }
}

fn saturate(v: i128) -> i8 {
    v.clamp(i8::MIN as i128, i8::MAX as i128) as i8
}

/// Rescales an integer at fraction length `from` to an 8-bit code at `to`.
pub fn requantize(v: i128, from: i32, to: QFormat) -> i8 {
    saturate(round_shift(v, from - to.n()))
}

/// Rescales an integer between fraction lengths without saturation.
pub(crate) fn align(v: i128, from: i32, to: i32) -> i128 {
    round_shift(v, from - to)
}

/// Round-half-to-even of `num / den` for `den > 0`.
pub(crate) fn div_round(num: i128, den: i128) -> i128 {
    let q = num.div_euclid(den);
    let r = num.rem_euclid(den);
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    }
}

/// Lookup index of a value at fraction length `from`.
pub fn gate_index(v: i128, from: i32) -> i32 {
    round_shift(v, from - GATE_INPUT_FRAC).clamp(-(GATE_INPUT_HALF as i128), GATE_INPUT_HALF as i128 - 1) as i32
}

fn build_table(f: impl Fn(f64) -> f64) -> Vec<i8> {
    (-GATE_INPUT_HALF..GATE_INPUT_HALF)
        .map(|k| q_quantize(f(k as f64 * 2f64.powi(-GATE_INPUT_FRAC)), GATE_OUTPUT_FORMAT))
        .collect()
}

pub(crate) fn sigmoid_table() -> &'static [i8] {
    static T: OnceLock<Vec<i8>> = OnceLock::new();
    T.get_or_init(|| build_table(sigmoid::<f64>))
}

pub(crate) fn tanh_table() -> &'static [i8] {
    static T: OnceLock<Vec<i8>> = OnceLock::new();
    T.get_or_init(|| build_table(f64::tanh))
}

pub(crate) fn lookup(table: &[i8], index: i32) -> i8 {
    table[(index + GATE_INPUT_HALF) as usize]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_shift_half_even() {
        assert_eq!(round_shift(5, 1), 2);
        assert_eq!(round_shift(7, 1), 4);
        assert_eq!(round_shift(-5, 1), -2);
        assert_eq!(round_shift(-7, 1), -4);
        assert_eq!(round_shift(6, 2), 2);
        assert_eq!(round_shift(3, -2), 12);
        assert_eq!(round_shift(-1, 200), 0);
    }

    #[test]
    fn requantize_saturates() {
        assert_eq!(requantize(1 << 20, 0, QFormat(0)), 127);
        assert_eq!(requantize(-(1 << 20), 0, QFormat(0)), -128);
        assert_eq!(requantize(300, 4, QFormat(2)), 75);
    }

    #[test]
    fn div_round_matches_float() {
        for num in -50..50 {
            for den in 1..7 {
                let want = (num as f64 / den as f64).round_ties_even() as i128;
                assert_eq!(div_round(num, den), want, "{num}/{den}");
            }
        }
    }

    #[test]
    fn tables_are_monotone() {
        for t in [sigmoid_table(), tanh_table()] {
            assert!(t.windows(2).all(|w| w[0] <= w[1]));
        }
        assert_eq!(lookup(sigmoid_table(), 0), 64);
        assert_eq!(lookup(tanh_table(), 0), 0);
        assert_eq!(gate_index(1 << 20, 0), GATE_INPUT_HALF - 1);
        assert_eq!(gate_index(-(1 << 20), 0), -GATE_INPUT_HALF);
        assert_eq!(gate_index(3, 1), 384);
    }
}
