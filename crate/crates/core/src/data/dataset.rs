use crate::engine::Tensor;
use crate::error::{Error, Result};
use crate::models::ImageShape;

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// `[c, h, w]`, values in `[0, 1]`.
    pub image: Tensor,
    pub label: usize,
    pub subject: Option<String>,
}

/// Labeled images sharing one shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    class_names: Vec<String>,
    shape: ImageShape,
}

impl Dataset {
    /// Validates shape agreement, pixel range, and label range.
    pub fn new(samples: Vec<Sample>, class_names: Vec<String>) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::Data("dataset has no samples".into()))?;
        let dims = first.image.shape().to_vec();
        if dims.len() != 3 {
            return Err(Error::Data(format!("images must be [c,h,w], got {dims:?}")));
        }
        let shape = ImageShape::new(dims[0], dims[1], dims[2]);
        Self::validate(&samples, &class_names, shape)?;
        Ok(Self {
            samples,
            class_names,
            shape,
        })
    }

    fn validate(samples: &[Sample], class_names: &[String], shape: ImageShape) -> Result<()> {
        for (i, s) in samples.iter().enumerate() {
            if s.image.shape() != shape.dims() {
                return Err(Error::Data(format!(
                    "sample {i} has shape {:?}, expected {:?}",
                    s.image.shape(),
                    shape.dims()
                )));
            }
            if s.label >= class_names.len() {
                return Err(Error::Data(format!(
                    "sample {i} has label {} but only {} classes exist",
                    s.label,
                    class_names.len()
                )));
            }
            if let Some(v) = s.image.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Data(format!("sample {i} has pixel value {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn sample(&self, index: usize) -> &Sample {
        &self.samples[index]
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Sample indices grouped by label.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.class_names.len()];
        for (i, s) in self.samples.iter().enumerate() {
            by_class[s.label].push(i);
        }
        by_class
    }

    /// New dataset made of the given samples, keeping the class list.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let samples = indices.iter().map(|&i| self.samples[i].clone()).collect();
        Dataset::new(samples, self.class_names.clone())
    }

    /// Stacks the selected images into `[n, c, h, w]` with their labels.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Vec<usize>)> {
        let images: Vec<Tensor> = indices.iter().map(|&i| self.samples[i].image.clone()).collect();
        let labels = indices.iter().map(|&i| self.samples[i].label).collect();
        Ok((Tensor::stack(&images)?, labels))
    }

    /// Replaces every image via `f`, revalidating the result.
    pub fn map_images(&self, f: impl Fn(&Tensor) -> Tensor) -> Result<Dataset> {
        let samples = self
            .samples
            .iter()
            .map(|s| Sample {
                image: f(&s.image),
                ..s.clone()
            })
            .collect();
        Dataset::new(samples, self.class_names.clone())
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }
}
