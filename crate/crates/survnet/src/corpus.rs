//! Loading the digit and natural-image corpora from disk.

use std::fs;
use std::path::Path;

use survnet_core::datagen::Images;
use survnet_core::formats::{parse_cifar, parse_idx_images, parse_idx_labels};

use crate::error::{Error, Result};

/// Reads an IDX image file and its label file.
pub fn load_idx(images: &Path, labels: &Path) -> Result<(Images, Vec<u8>)> {
    let img_bytes = fs::read(images).map_err(Error::io(images))?;
    let lab_bytes = fs::read(labels).map_err(Error::io(labels))?;
    let imgs = parse_idx_images(&img_bytes).map_err(|e| Error::format(images, e))?;
    let labs = parse_idx_labels(&lab_bytes).map_err(|e| Error::format(labels, e))?;
    if imgs.len() != labs.len() {
        return Err(Error::format(
            labels,
            format!("{} labels for {} images", labs.len(), imgs.len()),
        ));
    }
    Ok((imgs, labs))
}

/// Reads one CIFAR-10 binary batch file.
pub fn load_cifar_binary(path: &Path) -> Result<(Images, Vec<u8>)> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    parse_cifar(&bytes).map_err(|e| Error::format(path, e))
}

/// The MNIST training or test split from a directory holding the standard
/// uncompressed file names.
pub fn load_mnist_dir(dir: &Path, train: bool) -> Result<(Images, Vec<u8>)> {
    let prefix = if train { "train" } else { "t10k" };
    load_idx(
        &dir.join(format!("{prefix}-images-idx3-ubyte")),
        &dir.join(format!("{prefix}-labels-idx1-ubyte")),
    )
}

/// All CIFAR-10 training batches, or the test batch.
pub fn load_cifar_dir(dir: &Path, train: bool) -> Result<Images> {
    let files: Vec<String> = if train {
        (1..=5).map(|i| format!("data_batch_{i}.bin")).collect()
    } else {
        vec!["test_batch.bin".to_string()]
    };
    let mut all = Images::new(32, 32, 3);
    for f in files {
        let (imgs, _) = load_cifar_binary(&dir.join(f))?;
        all.pixels.extend_from_slice(&imgs.pixels);
    }
    Ok(all)
}

/// Keeps the images whose label is in `classes`, up to `limit` of them.
pub fn select_classes(images: &Images, labels: &[u8], classes: &[u8], limit: usize) -> (Images, Vec<u8>) {
    let mut out = Images::new(images.height, images.width, images.channels);
    let mut kept = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if kept.len() == limit {
            break;
        }
        if classes.contains(&l) {
            out.push(images.get(i));
            kept.push(l);
        }
    }
    (out, kept)
}
