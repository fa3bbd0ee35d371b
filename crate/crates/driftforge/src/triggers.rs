//! Backdoor triggers and dataset poisoning.
//!
//! Three patch families are supported: an opaque corner patch (Badnets), an
//! alpha-blended seeded noise pattern (Blend), and a Wanet-style smooth
//! elastic warp (Warp). Blend and Warp carry their seeds in the spec so a
//! trigger is a pure function of (image, spec).

use serde::{Deserialize, Serialize};

use crate::drift::Dataset;
use crate::error::{Error, Result};
use crate::numcore::{bilinear_sample, bilinear_upsample, Image, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corner {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerSpec {
    Badnets {
        patch_size: usize,
        position: Corner,
        color: Vec<f64>,
    },
    Blend {
        pattern_seed: u64,
        blend_ratio: f64,
    },
    Warp {
        strength: f64,
        grid_size: usize,
        field_seed: u64,
    },
}

impl TriggerSpec {
    /// 3x3 opaque white corner patch, the classic configuration.
    pub fn badnets_default(channels: usize) -> TriggerSpec {
        TriggerSpec::Badnets {
            patch_size: 3,
            position: Corner::BottomRight,
            color: vec![1.0; channels],
        }
    }

    pub fn blend_default(pattern_seed: u64) -> TriggerSpec {
        TriggerSpec::Blend {
            pattern_seed,
            blend_ratio: 0.2,
        }
    }

    pub fn warp_default(field_seed: u64) -> TriggerSpec {
        TriggerSpec::Warp {
            strength: 0.5,
            grid_size: 4,
            field_seed,
        }
    }

    /// Checks the spec against a concrete image shape.
    pub fn validate_for(&self, channels: usize, height: usize, width: usize) -> Result<()> {
        match self {
            TriggerSpec::Badnets {
                patch_size, color, ..
            } => {
                if *patch_size == 0 || *patch_size > height.min(width) {
                    return Err(Error::invalid(format!(
                        "badnets patch_size {patch_size} outside 1..={}",
                        height.min(width)
                    )));
                }
                if color.len() != channels {
                    return Err(Error::shape(
                        format!("{channels} color components"),
                        format!("{}", color.len()),
                    ));
                }
                if color.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::invalid("badnets color outside [0, 1]"));
                }
            }
            TriggerSpec::Blend { blend_ratio, .. } => {
                if !(0.0..=1.0).contains(blend_ratio) {
                    return Err(Error::invalid(format!(
                        "blend ratio {blend_ratio} outside [0, 1]"
                    )));
                }
            }
            TriggerSpec::Warp {
                strength,
                grid_size,
                ..
            } => {
                if !strength.is_finite() || *strength < 0.0 {
                    return Err(Error::invalid(format!(
                        "warp strength must be >= 0, got {strength}"
                    )));
                }
                if *grid_size < 2 {
                    return Err(Error::invalid("warp grid_size must be >= 2"));
                }
            }
        }
        Ok(())
    }
}

/// Which update events get poisoned, with what, and how much.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoisonPlan {
    pub trigger: TriggerSpec,
    pub target_label: usize,
    pub ratio: f64,
    pub poisoned_updates: Vec<usize>,
}

impl PoisonPlan {
    /// One-shot plan poisoning a single update event.
    pub fn one_shot(trigger: TriggerSpec, target_label: usize, ratio: f64, update: usize) -> Self {
        PoisonPlan {
            trigger,
            target_label,
            ratio,
            poisoned_updates: vec![update],
        }
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(Error::invalid(format!(
                "poison ratio {} outside [0, 1]",
                self.ratio
            )));
        }
        if self.target_label >= num_classes {
            return Err(Error::LabelOutOfRange {
                label: self.target_label,
                num_classes,
            });
        }
        if self.poisoned_updates.is_empty() {
            return Err(Error::invalid(
                "poison plan needs at least one poisoned update (omit the plan for clean runs)",
            ));
        }
        Ok(())
    }

    pub fn poisons_update(&self, i: usize) -> bool {
        self.poisoned_updates.contains(&i)
    }

    /// Last poisoned event: updates after this one form the survivability
    /// measurement window.
    pub fn stop_index(&self) -> usize {
        *self.poisoned_updates.iter().max().expect("validated nonempty")
    }
}

fn noise_pattern(seed: u64, channels: usize, height: usize, width: usize) -> Image {
    let mut rng = Rng::derive(seed, &[0x424c_454e]);
    let raw: Vec<f64> = (0..channels * height * width)
        .map(|_| rng.next_f64())
        .collect();
    Image::from_raw(channels, height, width, raw).expect("noise pattern in range")
}

/// Warp displacement planes (dy, dx) for one image shape, each in [-1, 1]
/// before strength scaling.
fn warp_field(seed: u64, grid_size: usize, height: usize, width: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = Rng::derive(seed, &[0x5741_5250]);
    let g2 = grid_size * grid_size;
    let gy: Vec<f64> = (0..g2).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let gx: Vec<f64> = (0..g2).map(|_| rng.uniform(-1.0, 1.0)).collect();
    (
        bilinear_upsample(&gy, grid_size, height, width),
        bilinear_upsample(&gx, grid_size, height, width),
    )
}

/// Stamps the trigger onto a copy of `img`.
pub fn patch(img: &Image, trigger: &TriggerSpec) -> Result<Image> {
    let (c, h, w) = (img.channels(), img.height(), img.width());
    trigger.validate_for(c, h, w)?;
    match trigger {
        TriggerSpec::Badnets {
            patch_size,
            position,
            color,
        } => {
            let s = *patch_size;
            let (y0, x0) = match position {
                Corner::TopLeft => (0, 0),
                Corner::TopRight => (0, w - s),
                Corner::BottomLeft => (h - s, 0),
                Corner::BottomRight => (h - s, w - s),
            };
            let mut raw = img.flat().to_vec();
            for ch in 0..c {
                for y in y0..y0 + s {
                    for x in x0..x0 + s {
                        raw[(ch * h + y) * w + x] = color[ch];
                    }
                }
            }
            Image::from_raw(c, h, w, raw)
        }
        TriggerSpec::Blend {
            pattern_seed,
            blend_ratio,
        } => {
            let pattern = noise_pattern(*pattern_seed, c, h, w);
            let beta = *blend_ratio;
            let raw: Vec<f64> = img
                .flat()
                .iter()
                .zip(pattern.flat().iter())
                .map(|(a, p)| (1.0 - beta) * a + beta * p)
                .collect();
            Image::from_raw(c, h, w, raw)
        }
        TriggerSpec::Warp {
            strength,
            grid_size,
            field_seed,
        } => {
            let (dy, dx) = warp_field(*field_seed, *grid_size, h, w);
            let mut raw = Vec::with_capacity(c * h * w);
            for ch in 0..c {
                let plane = img.channel(ch);
                for y in 0..h {
                    for x in 0..w {
                        let sy = y as f64 + strength * dy[y * w + x];
                        let sx = x as f64 + strength * dx[y * w + x];
                        raw.push(bilinear_sample(plane, h, w, sy, sx));
                    }
                }
            }
            Image::from_raw(c, h, w, raw)
        }
    }
}

/// Poisons floor(ratio * N) samples chosen uniformly without replacement
/// among samples whose label differs from the target. Each chosen sample is
/// replaced by (patch(x), target_label). Returns the new dataset and the
/// chosen indices in ascending order.
pub fn poison_dataset(
    data: &Dataset,
    plan: &PoisonPlan,
    rng: &mut Rng,
) -> Result<(Dataset, Vec<usize>)> {
    plan.validate(data.num_classes())?;
    if let Some((c, h, w)) = data.image_dims() {
        plan.trigger.validate_for(c, h, w)?;
    }
    let count = (plan.ratio * data.len() as f64).floor() as usize;
    if plan.ratio == 0.0 || count == 0 {
        return Ok((data.clone(), Vec::new()));
    }
    let eligible: Vec<usize> = (0..data.len())
        .filter(|&i| data.label(i) != plan.target_label)
        .collect();
    if eligible.is_empty() {
        return Err(Error::NoEligibleSamples {
            target_label: plan.target_label,
        });
    }
    if count > eligible.len() {
        return Err(Error::NotEnoughEligible {
            requested: count,
            eligible: eligible.len(),
        });
    }
    let mut chosen: Vec<usize> = rng
        .sample_indices(eligible.len(), count)
        .into_iter()
        .map(|k| eligible[k])
        .collect();
    chosen.sort_unstable();
    let mut out = data.clone();
    for &i in &chosen {
        let stamped = patch(data.image(i), &plan.trigger)?;
        out.replace(i, stamped, plan.target_label);
    }
    Ok((out, chosen))
}
