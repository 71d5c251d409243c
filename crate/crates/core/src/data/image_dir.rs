//! Directory-of-images datasets.
//!
//! Layout: `root/<class_name>/[<subject_id>__]<name>.(pgm|ppm|png)`. Classes
//! are indexed by sorted directory name.

use std::path::{Path, PathBuf};

use super::dataset::{Dataset, Sample};
use super::pnm;
use super::preprocess::{preprocess, PreprocessTarget};
use crate::engine::Tensor;
use crate::error::{Error, Result};

const EXTENSIONS: [&str; 3] = ["pgm", "ppm", "png"];

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Subject id encoded as a `<subject>__` file-name prefix.
pub fn subject_from_filename(name: &str) -> Option<String> {
    name.split_once("__").map(|(s, _)| s.to_string()).filter(|s| !s.is_empty())
}

fn read_png(path: &Path) -> Result<Tensor> {
    let img = image::open(path).map_err(|e| Error::Format {
        what: "PNG image",
        detail: format!("{}: {e}", path.display()),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        let rgb = img.to_rgb8();
        let mut data = vec![0.0; 3 * h * w];
        for (i, px) in rgb.pixels().enumerate() {
            for ch in 0..3 {
                data[ch * h * w + i] = px[ch] as f64 / 255.0;
            }
        }
        Tensor::new(vec![3, h, w], data)
    } else {
        let data = img.to_luma8().pixels().map(|p| p[0] as f64 / 255.0).collect();
        Tensor::new(vec![1, h, w], data)
    }
}

pub fn read_image(path: &Path) -> Result<Tensor> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") => read_png(path),
        _ => pnm::read(path),
    }
}

pub fn load_image_dir(root: &Path) -> Result<Dataset> {
    load_image_dir_with(root, None)
}

/// Loads every image under `root`, optionally preprocessing each one before
/// the shape-consistency check.
pub fn load_image_dir_with(root: &Path, target: Option<&PreprocessTarget>) -> Result<Dataset> {
    let class_dirs: Vec<PathBuf> = sorted_entries(root)?.into_iter().filter(|p| p.is_dir()).collect();
    if class_dirs.is_empty() {
        return Err(Error::Data(format!("{} contains no class directories", root.display())));
    }
    let mut class_names = Vec::new();
    let mut samples = Vec::new();
    let mut paths = Vec::new();
    for (label, dir) in class_dirs.iter().enumerate() {
        let name = dir.file_name().unwrap().to_string_lossy().into_owned();
        let files: Vec<PathBuf> = sorted_entries(dir)?
            .into_iter()
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            })
            .collect();
        if files.is_empty() {
            return Err(Error::Data(format!("class directory {} holds no images", dir.display())));
        }
        for file in files {
            let image = read_image(&file)?;
            let image = match target {
                Some(t) => preprocess(&image, t),
                None => image,
            };
            let stem = file.file_name().unwrap().to_string_lossy();
            samples.push(Sample {
                image,
                label,
                subject: subject_from_filename(&stem),
            });
            paths.push(file);
        }
        class_names.push(name);
    }

    let reference = samples[0].image.shape().to_vec();
    let offending: Vec<String> = samples
        .iter()
        .zip(&paths)
        .filter(|(s, _)| s.image.shape() != reference)
        .map(|(s, p)| format!("{} {:?}", p.display(), s.image.shape()))
        .collect();
    if !offending.is_empty() {
        return Err(Error::Data(format!(
            "images must share one shape ({} is {reference:?}); mismatched: {}",
            paths[0].display(),
            offending.join(", ")
        )));
    }
    Dataset::new(samples, class_names)
}

/// Writes `dataset` in the directory layout [`load_image_dir`] reads.
pub fn write_image_dir(root: &Path, dataset: &Dataset) -> Result<Vec<PathBuf>> {
    let ext = if dataset.shape().channels == 1 { "pgm" } else { "ppm" };
    let mut written = Vec::new();
    for name in dataset.class_names() {
        let dir = root.join(name);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    for (i, s) in dataset.samples().iter().enumerate() {
        let file = match &s.subject {
            Some(subj) => format!("{subj}__{i:05}.{ext}"),
            None => format!("{i:05}.{ext}"),
        };
        let path = root.join(&dataset.class_names()[s.label]).join(file);
        pnm::write(&path, &s.image)?;
        written.push(path);
    }
    Ok(written)
}
