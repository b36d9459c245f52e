//! Multi-view datasets, view splitting and paired source/target batching.

mod archive;
mod dataset;
mod folder;
mod image;
mod loader;
mod synth;

pub use archive::{load_archive, save_archive, ArchiveHeader};
pub use dataset::{Domain, DomainDataset, MultiViewSample};
pub use folder::{class_names, load_canvas, load_image_folder};
pub use image::{split_views, Image};
pub use loader::{make_paired_loader, PairedBatch, PairedLoader};
pub use synth::{synth_shift_dataset, ShiftParams, SynthSpec};
