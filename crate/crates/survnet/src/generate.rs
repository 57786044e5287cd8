//! Builds train and test datasets from generation settings.

use survnet_core::datagen::{gen_nodule_cifar, gen_sim_ab, synth_base_images, BaseKind, Split, SurvivalDataset};

use crate::config::{DataPreset, GenSettings};
use crate::corpus::{load_cifar_dir, load_mnist_dir, select_classes};
use crate::error::{Error, Result};

/// Generated splits and a one-line description of the image source.
pub struct Generated {
    pub train: SurvivalDataset,
    pub test: SurvivalDataset,
    pub source: String,
}

pub fn generate(s: &GenSettings) -> Result<Generated> {
    let cfg = s.gen_config()?;
    let sizes = [(Split::Train, cfg.train), (Split::Test, cfg.test)];
    let mut out = Vec::with_capacity(2);
    let source;
    match s.preset {
        DataPreset::SimA | DataPreset::SimB => {
            if let Some(dir) = &s.mnist_dir {
                source = format!("mnist digits 0 and 1 from {}", dir.display());
                for (split, n) in sizes {
                    let (images, labels) = load_mnist_dir(dir, split == Split::Train)?;
                    let (images, classes) = select_classes(&images, &labels, &[0, 1], n);
                    if classes.len() < n {
                        return Err(Error::Config(format!(
                            "{} has only {} zeros and ones, {n} requested",
                            dir.display(),
                            classes.len()
                        )));
                    }
                    out.push(gen_sim_ab(&images, &classes, &cfg, split)?);
                }
            } else {
                source = "synthetic two-class shapes".into();
                for (split, n) in sizes {
                    let (images, classes) = synth_base_images(BaseKind::TwoClassShapes, n, s.seed, split);
                    out.push(gen_sim_ab(&images, &classes, &cfg, split)?);
                }
            }
        }
        DataPreset::NoduleCifar => {
            if let Some(dir) = &s.cifar_dir {
                source = format!("cifar-10 from {}", dir.display());
                for (split, n) in sizes {
                    let base = load_cifar_dir(dir, split == Split::Train)?;
                    out.push(gen_nodule_cifar(&base, n, &cfg, split)?);
                }
            } else {
                source = "synthetic 32x32 noise".into();
                for (split, n) in sizes {
                    let (base, _) = synth_base_images(BaseKind::Noise32, n, s.seed, split);
                    out.push(gen_nodule_cifar(&base, n, &cfg, split)?);
                }
            }
        }
    }
    for d in &mut out {
        d.provenance.params.push(("source".into(), source.clone()));
    }
    let test = out.pop().expect("two splits");
    let train = out.pop().expect("two splits");
    Ok(Generated { train, test, source })
}
