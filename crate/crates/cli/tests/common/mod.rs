#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use octaug::io::{write_boundaries, write_image, write_manifest, write_mask, DatasetManifest, ManifestEntry};
use octaug::{BoundarySet, FluidMask, Image, Sample, SeededRng};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Layered B-scan with three surfaces, an IRF pocket and mild speckle.
pub fn retina_sample(id: &str, h: usize, w: usize, seed: u64) -> Sample {
    let mut rng = SeededRng::from_seed(seed);
    let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let tilt: f64 = rng.random_range(-0.05..0.05);
    let hf = h as f64;
    let top: Vec<f64> = (0..w)
        .map(|c| {
            let x = c as f64 / w as f64;
            0.3 * hf + 0.04 * hf * (x * std::f64::consts::TAU + phase).sin() + tilt * (c as f64 - w as f64 / 2.0)
        })
        .collect();
    let s1: Vec<f64> = top.iter().map(|t| t + 0.15 * hf).collect();
    let s2: Vec<f64> = top.iter().map(|t| t + 0.3 * hf).collect();
    let noise = Normal::new(0.0, 0.02).unwrap();
    let img = Image::from_fn(h, w, |r, c| {
        let y = r as f64;
        let base = if y < top[c] {
            0.05
        } else if y < s1[c] {
            0.6
        } else if y < s2[c] {
            0.35
        } else if y < s2[c] + 0.05 * hf {
            0.9
        } else {
            0.2
        };
        base + noise.sample(&mut rng)
    })
    .unwrap();
    let (cx, rx, ry) = (w as f64 / 2.0, w as f64 / 8.0, 0.04 * hf);
    let mask = FluidMask::from_fn(h, w, |r, c| {
        let cy = (top[c] + s1[c]) / 2.0;
        let (dx, dy) = ((c as f64 - cx) / rx, (r as f64 - cy) / ry);
        if dx * dx + dy * dy <= 1.0 {
            1
        } else {
            0
        }
    })
    .unwrap();
    let bounds = BoundarySet::new(w, vec![top, s1, s2]).unwrap();
    Sample::new(id, img).with_boundaries(bounds).with_mask(mask)
}

/// Writes `n` synthetic samples plus `manifest.json` into `dir`.
pub fn write_dataset(dir: &Path, n: usize, h: usize, w: usize, seed: u64) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let entries = (0..n)
        .map(|i| {
            let id = format!("scan{i:03}");
            let s = retina_sample(&id, h, w, seed * 1000 + i as u64);
            write_sample(dir, &s)
        })
        .collect();
    let path = dir.join("manifest.json");
    write_manifest(&DatasetManifest::new(entries, dir), &path).unwrap();
    path
}

pub fn write_sample(dir: &Path, s: &Sample) -> ManifestEntry {
    let image = PathBuf::from(format!("{}.png", s.id));
    write_image(&s.image, dir.join(&image)).unwrap();
    let mask = s.mask.as_ref().map(|m| {
        let p = PathBuf::from(format!("{}_mask.png", s.id));
        write_mask(m, dir.join(&p)).unwrap();
        p
    });
    let boundaries = s.boundaries.as_ref().map(|b| {
        let p = PathBuf::from(format!("{}.csv", s.id));
        write_boundaries(b, dir.join(&p)).unwrap();
        p
    });
    ManifestEntry {
        id: s.id.clone(),
        image,
        mask,
        boundaries,
        device: None,
    }
}

/// Every file under `dir`, keyed by relative path.
pub fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

pub fn octaug(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_octaug"))
        .args(args)
        .output()
        .expect("failed to spawn octaug")
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
