//! Single-photon detector statistics: closed-form click rates and a
//! seeded Monte-Carlo click-stream sampler.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpadParams {
    pub efficiency: f64,
    pub dark_rate_hz: f64,
    pub dead_time_s: f64,
}

impl Default for SpadParams {
    fn default() -> Self {
        Self { efficiency: 0.10, dark_rate_hz: 620.0, dead_time_s: 10e-6 }
    }
}

impl SpadParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(domain(format!("detector efficiency {} outside [0, 1]", self.efficiency)));
        }
        if !(self.dark_rate_hz >= 0.0) || !(self.dead_time_s >= 0.0) {
            return Err(domain("dark rate and dead time must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DetectorId {
    Data,
    Monitor,
}

/// One registered detector event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClickRecord {
    pub detector: DetectorId,
    pub frame: u64,
    pub slot: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClickOrigin {
    Signal,
    Background,
}

/// Click plus the simulator-side knowledge of what caused it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaggedClick {
    pub record: ClickRecord,
    pub origin: ClickOrigin,
}

/// Slot timing shared by the sampler and the dead-time filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotClock {
    pub slots_per_frame: u32,
    pub slot_duration_s: f64,
}

impl SlotClock {
    pub fn frame_duration_s(&self) -> f64 {
        self.slots_per_frame as f64 * self.slot_duration_s
    }

    pub fn global_slot(&self, r: &ClickRecord) -> u64 {
        r.frame * self.slots_per_frame as u64 + r.slot as u64
    }
}

/// Probability that a pulse with `mean_photons` triggers the detector.
pub fn click_probability(mean_photons: f64, spad: &SpadParams) -> Result<f64> {
    if !(mean_photons >= 0.0) {
        return Err(domain(format!("mean photon number must be >= 0, got {mean_photons}")));
    }
    Ok(-(-mean_photons * spad.efficiency).exp_m1())
}

/// Background click rate from in-band noise plus dark counts, Hz.
pub fn background_click_rate(noise_flux: f64, spad: &SpadParams) -> Result<f64> {
    if !(noise_flux >= 0.0) {
        return Err(domain(format!("noise flux must be >= 0, got {noise_flux}")));
    }
    Ok(noise_flux * spad.efficiency + spad.dark_rate_hz)
}

/// Drops clicks that arrive within `dead_time_s` of the previous kept click on
/// the same detector. Input must be time-ordered per detector.
pub fn apply_dead_time(clicks: Vec<TaggedClick>, dead_time_s: f64, clock: &SlotClock) -> Vec<TaggedClick> {
    if dead_time_s <= 0.0 {
        return clicks;
    }
    let mut last: [Option<u64>; 2] = [None, None];
    clicks
        .into_iter()
        .filter(|c| {
            let idx = c.record.detector as usize;
            let g = clock.global_slot(&c.record);
            match last[idx] {
                Some(prev) if ((g - prev) as f64) * clock.slot_duration_s < dead_time_s => false,
                _ => {
                    last[idx] = Some(g);
                    true
                }
            }
        })
        .collect()
}

/// Monte-Carlo click generator for one detector.
///
/// Signal clicks are independent Bernoulli draws per slot with probability
/// `prob(global_slot)`. Background clicks are a Poisson count per frame placed
/// uniformly over the frame's slots. Dead time is applied last.
pub fn sample_tagged<R, F>(
    detector: DetectorId,
    clock: &SlotClock,
    frames: u64,
    mut prob: F,
    background_rate_hz: f64,
    dead_time_s: f64,
    rng: &mut R,
) -> Result<Vec<TaggedClick>>
where
    R: Rng + ?Sized,
    F: FnMut(u64) -> f64,
{
    if !(background_rate_hz >= 0.0) {
        return Err(domain("background rate must be >= 0"));
    }
    let spf = clock.slots_per_frame;
    let bg_mean = background_rate_hz * clock.frame_duration_s();
    let poisson = if bg_mean > 0.0 {
        Some(Poisson::new(bg_mean).map_err(|e| domain(e.to_string()))?)
    } else {
        None
    };

    let mut out = Vec::new();
    let mut frame_buf = Vec::new();
    for frame in 0..frames {
        frame_buf.clear();
        let base = frame * spf as u64;
        for slot in 0..spf {
            let p = prob(base + slot as u64);
            if p > 0.0 && (p >= 1.0 || rng.random::<f64>() < p) {
                frame_buf.push(TaggedClick {
                    record: ClickRecord { detector, frame, slot },
                    origin: ClickOrigin::Signal,
                });
            }
        }
        if let Some(dist) = &poisson {
            let n = dist.sample(rng) as u64;
            if n > 0 {
                for _ in 0..n {
                    let slot = rng.random_range(0..spf);
                    frame_buf.push(TaggedClick {
                        record: ClickRecord { detector, frame, slot },
                        origin: ClickOrigin::Background,
                    });
                }
                frame_buf.sort_by_key(|c| c.record.slot);
            }
        }
        out.extend_from_slice(&frame_buf);
    }
    Ok(apply_dead_time(out, dead_time_s, clock))
}

/// Samples a click stream from explicit per-slot probabilities.
///
/// `per_slot_probabilities` either covers one frame (repeated every frame)
/// or all `duration_frames` frames back to back.
pub fn sample_click_stream(
    per_slot_probabilities: &[f64],
    background_rate_hz: f64,
    duration_frames: u64,
    spad: &SpadParams,
    clock: &SlotClock,
    seed: u64,
) -> Result<Vec<ClickRecord>> {
    if per_slot_probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(domain("slot probabilities must lie in [0, 1]"));
    }
    let spf = clock.slots_per_frame as usize;
    let n = per_slot_probabilities.len();
    let repeat = if n == spf {
        true
    } else if n as u64 == duration_frames * spf as u64 {
        false
    } else {
        return Err(domain(format!(
            "expected {spf} or {} slot probabilities, got {n}",
            duration_frames * spf as u64
        )));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clicks = sample_tagged(
        DetectorId::Data,
        clock,
        duration_frames,
        |g| {
            if repeat {
                per_slot_probabilities[(g % spf as u64) as usize]
            } else {
                per_slot_probabilities[g as usize]
            }
        },
        background_rate_hz,
        spad.dead_time_s,
        &mut rng,
    )?;
    Ok(clicks.into_iter().map(|c| c.record).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CLOCK: SlotClock = SlotClock { slots_per_frame: 1000, slot_duration_s: 1e-9 };

    fn no_dead() -> SpadParams {
        SpadParams { dead_time_s: 0.0, ..SpadParams::default() }
    }

    #[test]
    fn click_probability_examples() {
        let spad = SpadParams::default();
        assert_eq!(click_probability(0.0, &spad).unwrap(), 0.0);
        assert!((click_probability(0.01, &spad).unwrap() - 9.995_001_666_249_78e-4).abs() < 1e-15);
        assert_eq!(click_probability(1e6, &spad).unwrap(), 1.0);
        assert!(click_probability(-1.0, &spad).is_err());
    }

    #[test]
    fn background_examples() {
        let spad = SpadParams::default();
        assert_eq!(background_click_rate(0.0, &spad).unwrap(), 620.0);
        assert!((background_click_rate(1e5, &spad).unwrap() - 1.062e4).abs() < 1e-9);
        let blind = SpadParams { efficiency: 0.0, ..spad };
        assert_eq!(background_click_rate(1e9, &blind).unwrap(), 620.0);
    }

    #[test]
    fn empty_stream() {
        let clicks = sample_click_stream(&[0.0; 1000], 0.0, 100, &no_dead(), &CLOCK, 1).unwrap();
        assert!(clicks.is_empty());
    }

    #[test]
    fn certain_detection() {
        let mut p = vec![0.0; 1000];
        p[17] = 1.0;
        let clicks = sample_click_stream(&p, 0.0, 1000, &no_dead(), &CLOCK, 9).unwrap();
        assert_eq!(clicks.len(), 1000);
        assert!(clicks.iter().all(|c| c.slot == 17));
    }

    #[test]
    fn binomial_count() {
        // 10^6 slots at p = 1e-3: mean 1000, sigma = sqrt(1e6 * 1e-3 * 0.999) ~ 31.6.
        let sigma = (1e6f64 * 1e-3 * (1.0 - 1e-3)).sqrt();
        for seed in 0..5 {
            let n = sample_click_stream(&[1e-3; 1000], 0.0, 1000, &no_dead(), &CLOCK, seed).unwrap().len();
            assert!((n as f64 - 1000.0).abs() < 5.0 * sigma, "seed {seed}: {n}");
        }
    }

    #[test]
    fn full_length_probabilities() {
        let mut p = vec![0.0; 3000];
        p[2999] = 1.0;
        let clicks = sample_click_stream(&p, 0.0, 3, &no_dead(), &CLOCK, 2).unwrap();
        assert_eq!(clicks, vec![ClickRecord { detector: DetectorId::Data, frame: 2, slot: 999 }]);
        assert!(sample_click_stream(&[0.0; 7], 0.0, 3, &no_dead(), &CLOCK, 2).is_err());
        assert!(sample_click_stream(&[1.5; 1000], 0.0, 3, &no_dead(), &CLOCK, 2).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let a = sample_click_stream(&[2e-3; 1000], 1e5, 500, &no_dead(), &CLOCK, 77).unwrap();
        let b = sample_click_stream(&[2e-3; 1000], 1e5, 500, &no_dead(), &CLOCK, 77).unwrap();
        let c = sample_click_stream(&[2e-3; 1000], 1e5, 500, &no_dead(), &CLOCK, 78).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn dead_time_blocks_followers() {
        let spad = SpadParams { dead_time_s: 10e-6, ..SpadParams::default() };
        // Certain click every slot: only one click per 10 us survives.
        let clicks = sample_click_stream(&[1.0; 1000], 0.0, 100, &spad, &CLOCK, 3).unwrap();
        assert_eq!(clicks.len(), 10);
    }

    #[test]
    fn expected_count_matches_over_seeds() {
        // Analytic mean: sum of probabilities plus background * duration.
        let frames = 2000u64;
        let probs: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 4e-4 } else { 0.0 }).collect();
        let bg = 3e4;
        let signal_mean: f64 = probs.iter().sum::<f64>() * frames as f64;
        let signal_var: f64 = probs.iter().map(|p| p * (1.0 - p)).sum::<f64>() * frames as f64;
        let bg_mean = bg * frames as f64 * CLOCK.frame_duration_s();
        let sigma = (signal_var + bg_mean).sqrt();
        for seed in 0..20 {
            let n = sample_click_stream(&probs, bg, frames, &no_dead(), &CLOCK, seed).unwrap().len() as f64;
            assert!((n - signal_mean - bg_mean).abs() < 5.0 * sigma, "seed {seed}: {n}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn click_probability_monotone(mu in 0.0f64..5.0, d in 1e-3f64..1.0, eta in 0.01f64..0.99) {
                let a = SpadParams { efficiency: eta, ..SpadParams::default() };
                let b = SpadParams { efficiency: eta + 0.005, ..SpadParams::default() };
                let p = click_probability(mu + d, &a).unwrap();
                prop_assert!(p > click_probability(mu, &a).unwrap());
                if mu > 0.0 {
                    prop_assert!(click_probability(mu, &b).unwrap() > click_probability(mu, &a).unwrap());
                }
            }

            #[test]
            fn dead_time_never_adds(slots in proptest::collection::vec(0u64..50_000, 0..200), dead in 0.0f64..5e-6) {
                let mut slots = slots;
                slots.sort_unstable();
                let clicks: Vec<TaggedClick> = slots.iter().map(|&g| TaggedClick {
                    record: ClickRecord { detector: DetectorId::Data, frame: g / 1000, slot: (g % 1000) as u32 },
                    origin: ClickOrigin::Signal,
                }).collect();
                let kept = apply_dead_time(clicks.clone(), dead, &CLOCK);
                prop_assert!(kept.len() <= clicks.len());
                prop_assert_eq!(apply_dead_time(clicks.clone(), 0.0, &CLOCK), clicks);
            }
        }
    }
}
