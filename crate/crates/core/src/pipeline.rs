//! Glue between synthetic data, training, sampling and diagnostics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::diffusion::{BoxSet, ConditionInputs, TrainingExample};
use crate::error::{GeoError, Result};
use crate::geometry::part::PartModel;
use crate::synth::{normalize, synth_assembly, AssemblySample, Family, FamilyParams};

/// `count` normalized samples cycling through `families`, reproducible
/// from `seed`.
pub fn synth_dataset(families: &[Family], count: usize, seed: u64) -> Result<Vec<AssemblySample>> {
    if families.is_empty() {
        return Err(GeoError::InvalidInput("no families requested".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<FamilyParams> =
        (0..count).map(|k| FamilyParams::random(families[k % families.len()], &mut rng)).collect();
    params.par_iter().map(|p| normalize(&synth_assembly(p)?).map(|(s, _)| s)).collect()
}

/// Training pair of a sample: target boxes with contact faces first, and
/// the condition part with the prompt.
pub fn training_example(sample: &AssemblySample) -> Result<TrainingExample> {
    let (target, _) = BoxSet::from_part_contacts_first(&sample.target)?;
    Ok(TrainingExample { target, cond: ConditionInputs::new(&sample.condition, &sample.prompt)? })
}

/// Top-down occupancy over `[-extent, extent]²`: how many parts cover
/// each pixel with at least one face sample.
pub fn occupancy_counts(models: &[PartModel], pixels: usize, extent: f64) -> Vec<u32> {
    let mut counts = vec![0u32; pixels * pixels];
    for m in models {
        let mut hit = vec![false; pixels * pixels];
        for g in m.grids() {
            for p in g.points() {
                let fx = (p.x + extent) / (2.0 * extent) * pixels as f64;
                let fy = (extent - p.y) / (2.0 * extent) * pixels as f64;
                if fx >= 0.0 && fy >= 0.0 && fx < pixels as f64 && fy < pixels as f64 {
                    hit[fy as usize * pixels + fx as usize] = true;
                }
            }
        }
        for (c, h) in counts.iter_mut().zip(hit) {
            *c += u32::from(h);
        }
    }
    counts
}

/// Orthographic top-down occupancy heatmap as SVG, linear grayscale with
/// black at the highest count.
pub fn heatmap_svg(models: &[PartModel], pixels: usize, extent: f64) -> String {
    let counts = occupancy_counts(models, pixels, extent);
    let max = counts.iter().copied().max().unwrap_or(0).max(1);
    let cell = 8;
    let side = pixels * cell;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{side}\" height=\"{side}\" viewBox=\"0 0 {side} {side}\">\n\
         <rect width=\"{side}\" height=\"{side}\" fill=\"rgb(255,255,255)\"/>\n"
    );
    for (idx, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let level = 255 - (255 * c / max);
        let (row, col) = (idx / pixels, idx % pixels);
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({level},{level},{level})\"/>\n",
            col * cell,
            row * cell
        ));
    }
    svg.push_str(&format!("<!-- models: {}, max count: {max} -->\n</svg>\n", models.len()));
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_is_reproducible() {
        let a = synth_dataset(&[Family::PegSocket, Family::BracketPlate], 4, 11).unwrap();
        let b = synth_dataset(&[Family::PegSocket, Family::BracketPlate], 4, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[1].family, Family::BracketPlate);
    }

    #[test]
    fn example_puts_contacts_first() {
        let s = &synth_dataset(&[Family::FlangeRing], 1, 2).unwrap()[0];
        let ex = training_example(s).unwrap();
        let k = s.target.contact_indices().len();
        assert!(ex.target.contact_mask[..k].iter().all(|&b| b));
        assert!(ex.target.contact_mask[k..].iter().all(|&b| !b));
    }

    #[test]
    fn heatmap_counts_each_model_once_per_pixel() {
        let s = synth_dataset(&[Family::PegSocket], 3, 1).unwrap();
        let parts: Vec<PartModel> = s.into_iter().map(|x| x.target).collect();
        let c = occupancy_counts(&parts, 16, 3.0);
        assert!(c.iter().all(|&v| v <= 3));
        assert!(heatmap_svg(&parts, 16, 3.0).starts_with("<svg"));
    }
}
