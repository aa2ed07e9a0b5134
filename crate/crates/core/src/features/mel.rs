use std::f64::consts::PI;

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Symmetric Hann window.
pub fn hann_window(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len).map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / denom).cos()).collect()
}

/// Triangular filters with unit peak, centres equally spaced on the mel scale.
///
/// Returns `num_filters` rows of `nfft / 2 + 1` weights. Adjacent triangles
/// cross at half height so the column sums never exceed one.
pub fn mel_filterbank(
    num_filters: usize,
    nfft: usize,
    sample_rate: f64,
    fmin: f64,
    fmax: f64,
) -> Vec<Vec<f64>> {
    let bins = nfft / 2 + 1;
    let (lo, hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let edges: Vec<f64> = (0..num_filters + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (num_filters + 1) as f64))
        .collect();
    (0..num_filters)
        .map(|m| {
            let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * sample_rate / nfft as f64;
                    let up = (f - left) / (centre - left);
                    let down = (right - f) / (right - centre);
                    up.min(down).max(0.0)
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II matrix, `size × size`, row `k` is basis vector `k`.
pub fn dct2_orthonormal(size: usize) -> Vec<Vec<f64>> {
    let n = size as f64;
    (0..size)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            (0..size)
                .map(|i| scale * (PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n)).cos())
                .collect()
        })
        .collect()
}
