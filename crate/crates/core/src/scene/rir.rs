//! Image-source room impulse responses for a shoebox room.

use crate::dsp::interp::SincTable;
use crate::geometry::{distance, Point3};

/// Uniform wall reflection coefficient from Sabine's formula.
pub fn sabine_reflection(room: &Point3, t60_s: f64) -> f64 {
    if t60_s <= 0.0 {
        return 0.0;
    }
    let [lx, ly, lz] = *room;
    let volume = lx * ly * lz;
    let surface = 2.0 * (lx * ly + lx * lz + ly * lz);
    let alpha = (0.161 * volume / (surface * t60_s)).min(1.0);
    (1.0 - alpha).sqrt()
}

/// Impulse response from `src` to `mic`, `1/r` spreading, fractional delays
/// through the shared windowed-sinc table. With `t60_s == 0` only the direct
/// path is rendered.
pub fn image_source_rir(
    room: &Point3,
    src: &Point3,
    mic: &Point3,
    fs: u32,
    c: f64,
    t60_s: f64,
) -> Vec<f64> {
    let fs_f = fs as f64;
    let table = SincTable::shared();
    let hw = 16isize;
    let direct = distance(src, mic) / c * fs_f;
    let len = ((t60_s * fs_f).ceil() as usize).max(direct.ceil() as usize + 2 * hw as usize);
    let mut h = vec![0.0; len];
    let beta = sabine_reflection(room, t60_s);

    let mut add_tap = |delay: f64, gain: f64| {
        let centre = delay.floor() as isize;
        for n in (centre - hw + 1)..=(centre + hw) {
            if n >= 0 && (n as usize) < len {
                h[n as usize] += gain * table_eval(table, n as f64 - delay);
            }
        }
    };

    if beta == 0.0 {
        add_tap(direct, 1.0 / distance(src, mic));
        return h;
    }

    let max_path = len as f64 / fs_f * c;
    let orders: Vec<isize> = room
        .iter()
        .map(|l| (max_path / (2.0 * l)).ceil() as isize + 1)
        .collect();
    for nx in -orders[0]..=orders[0] {
        for ny in -orders[1]..=orders[1] {
            for nz in -orders[2]..=orders[2] {
                for p in 0..8usize {
                    let px = (p & 1) as isize;
                    let py = ((p >> 1) & 1) as isize;
                    let pz = ((p >> 2) & 1) as isize;
                    let img = [
                        (1 - 2 * px) as f64 * src[0] + 2.0 * nx as f64 * room[0],
                        (1 - 2 * py) as f64 * src[1] + 2.0 * ny as f64 * room[1],
                        (1 - 2 * pz) as f64 * src[2] + 2.0 * nz as f64 * room[2],
                    ];
                    let dist = distance(&img, mic);
                    if dist > max_path {
                        continue;
                    }
                    let reflections =
                        (nx - px).abs() + nx.abs() + (ny - py).abs() + ny.abs() + (nz - pz).abs() + nz.abs();
                    let gain = beta.powi(reflections as i32) / dist.max(1e-3);
                    add_tap(dist / c * fs_f, gain);
                }
            }
        }
    }
    h
}

fn table_eval(table: &SincTable, x: f64) -> f64 {
    table.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anechoic_has_single_peak_at_direct_delay() {
        let room = [6.0, 5.0, 3.0];
        let src = [1.0, 1.0, 1.5];
        let mic = [3.0, 1.0, 1.5];
        let h = image_source_rir(&room, &src, &mic, 16000, 343.0, 0.0);
        let peak = h
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0;
        let want = (2.0 / 343.0 * 16000.0_f64).round() as usize;
        assert_eq!(peak, want);
        assert!((h[peak] - 0.5 * table_eval(SincTable::shared(), peak as f64 - 2.0 / 343.0 * 16000.0)).abs() < 1e-12);
    }

    #[test]
    fn reverberant_energy_decays() {
        let room = [6.0, 5.0, 3.0];
        let h = image_source_rir(&room, &[1.0, 1.5, 1.2], &[4.0, 3.0, 0.8], 16000, 343.0, 0.3);
        let early: f64 = h[..1600].iter().map(|v| v * v).sum();
        let late: f64 = h[3200..4800].iter().map(|v| v * v).sum();
        assert!(late > 0.0 && late < early);
        assert!(sabine_reflection(&room, 0.3) > 0.0 && sabine_reflection(&room, 0.3) < 1.0);
    }
}
