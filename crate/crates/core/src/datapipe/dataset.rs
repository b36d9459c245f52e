use serde::{Deserialize, Serialize};

use super::image::Image;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

/// The K device views of one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiViewSample {
    views: Vec<Image>,
    label: Option<usize>,
    domain: Domain,
}

impl MultiViewSample {
    pub fn new(views: Vec<Image>, label: Option<usize>, domain: Domain) -> Result<Self> {
        let first = views
            .first()
            .ok_or_else(|| Error::Empty("sample has no views".into()))?
            .shape();
        if views.iter().any(|v| v.shape() != first) {
            return Err(Error::Dimension("views of one sample differ in shape".into()));
        }
        if domain == Domain::Source && label.is_none() {
            return Err(Error::Data("source-domain sample without a label".into()));
        }
        Ok(MultiViewSample {
            views,
            label,
            domain,
        })
    }

    pub fn views(&self) -> &[Image] {
        &self.views
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn k_devices(&self) -> usize {
        self.views.len()
    }
}

/// An ordered collection of samples from one domain.
///
/// Target datasets carry no training labels; `eval_labels` holds the
/// ground truth that is used only for scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainDataset {
    samples: Vec<MultiViewSample>,
    class_count: usize,
    domain: Domain,
    eval_labels: Option<Vec<usize>>,
}

impl DomainDataset {
    pub fn new(
        samples: Vec<MultiViewSample>,
        class_count: usize,
        domain: Domain,
        eval_labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::Data(format!("class count {class_count} < 2")));
        }
        if let Some(first) = samples.first() {
            let k = first.k_devices();
            let shape = first.views()[0].shape();
            for s in &samples {
                if s.k_devices() != k || s.views()[0].shape() != shape {
                    return Err(Error::Dimension(
                        "samples disagree on device count or view shape".into(),
                    ));
                }
                if s.domain() != domain {
                    return Err(Error::Data("sample domain differs from dataset domain".into()));
                }
                if let Some(l) = s.label() {
                    if l >= class_count {
                        return Err(Error::Data(format!("label {l} >= class count {class_count}")));
                    }
                }
            }
        }
        if let Some(labels) = &eval_labels {
            if labels.len() != samples.len() {
                return Err(Error::Dimension("evaluation label count != sample count".into()));
            }
            if labels.iter().any(|&l| l >= class_count) {
                return Err(Error::Data("evaluation label out of range".into()));
            }
        }
        if domain == Domain::Source {
            let mut seen = vec![false; class_count];
            for s in &samples {
                if let Some(l) = s.label() {
                    seen[l] = true;
                }
            }
            if let Some(missing) = seen.iter().position(|&b| !b) {
                return Err(Error::Data(format!("source dataset has no sample of class {missing}")));
            }
        }
        Ok(DomainDataset {
            samples,
            class_count,
            domain,
            eval_labels,
        })
    }

    pub fn samples(&self) -> &[MultiViewSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn k_devices(&self) -> usize {
        self.samples.first().map_or(0, |s| s.k_devices())
    }

    pub fn view_shape(&self) -> Option<(usize, usize, usize)> {
        self.samples.first().map(|s| s.views()[0].shape())
    }

    /// Ground-truth label of sample `i` for scoring: the training label for
    /// source data, the held-back label for target data.
    pub fn truth(&self, i: usize) -> Option<usize> {
        self.samples[i]
            .label()
            .or_else(|| self.eval_labels.as_ref().map(|l| l[i]))
    }

    pub fn truths(&self) -> Option<Vec<usize>> {
        (0..self.len()).map(|i| self.truth(i)).collect()
    }
}
