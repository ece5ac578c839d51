//! Directory layouts for parameter sets and feature pyramids.
//!
//! Parameters: `level{id}.{layer}.weight.icft`, plus `level{id}.{layer}.bias.icft`
//! shaped `(1, c_out, 1, 1)` for layers with a bias. Pyramids:
//! `level{id}.icft`, one file per level.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Axis, Error, Result};
use crate::fusion::{FeaturePyramid, FusionConfig, FusionLevelParams, FusionParams, Layers, Modality};
use crate::tensor::Tensor;

use super::tensor_file::{read_tensor, write_tensor};

pub fn param_file_name(level: u8, layer: &str, part: &str) -> String {
    format!("level{level}.{layer}.{part}.icft")
}

pub fn pyramid_file_name(level: u8) -> String {
    format!("level{level}.icft")
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes every layer; returns the files in write order.
pub fn save_params(dir: impl AsRef<Path>, params: &FusionParams<f32>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    let mut written = Vec::new();
    for (id, name, layer) in params.named_layers() {
        let w = dir.join(param_file_name(id, &name, "weight"));
        write_tensor(&w, &layer.weights.weight)?;
        written.push(w);
        if let Some(b) = &layer.weights.bias {
            let p = dir.join(param_file_name(id, &name, "bias"));
            write_tensor(&p, &Tensor::new((1, b.len(), 1, 1), b.clone())?)?;
            written.push(p);
        }
    }
    Ok(written)
}

/// Loads parameters laid out for `cfg`, checking every shape against it.
pub fn load_params(dir: impl AsRef<Path>, cfg: &FusionConfig) -> Result<FusionParams<f32>> {
    let dir = dir.as_ref();
    cfg.validate()?;
    let mut levels = BTreeMap::new();
    for l in &cfg.levels {
        let mut p = FusionLevelParams::<f32>::zeros(l)?;
        for (name, layer) in p.layers_mut() {
            let w = read_tensor(dir.join(param_file_name(l.id, &name, "weight")))?;
            let want = layer.spec.weight_dims();
            if w.dims() != want {
                return Err(Error::InvalidConfig(format!(
                    "level{}.{name}: weight dims {:?}, expected {:?}",
                    l.id,
                    w.dims().as_array(),
                    want.as_array()
                )));
            }
            layer.weights.weight = w;
            if layer.spec.bias {
                let b = read_tensor(dir.join(param_file_name(l.id, &name, "bias")))?;
                if b.dims().as_array() != [1, layer.spec.c_out, 1, 1] {
                    return Err(Error::InvalidConfig(format!(
                        "level{}.{name}: bias dims {:?}, expected [1, {}, 1, 1]",
                        l.id,
                        b.dims().as_array(),
                        layer.spec.c_out
                    )));
                }
                layer.weights.bias = Some(b.into_data());
            }
        }
        levels.insert(l.id, p);
    }
    Ok(FusionParams { levels })
}

pub fn write_pyramid(dir: impl AsRef<Path>, pyr: &FeaturePyramid<f32>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    pyr.levels()
        .iter()
        .map(|(id, t)| {
            let p = dir.join(pyramid_file_name(*id));
            write_tensor(&p, t)?;
            Ok(p)
        })
        .collect()
}

/// Reads the levels of `cfg` from `dir` and checks channel widths and
/// finiteness.
pub fn read_pyramid(dir: impl AsRef<Path>, modality: Modality, cfg: &FusionConfig) -> Result<FeaturePyramid<f32>> {
    let dir = dir.as_ref();
    let mut levels = Vec::new();
    for l in &cfg.levels {
        let path = dir.join(pyramid_file_name(l.id));
        if !path.exists() {
            return Err(Error::MissingLevel(l.id));
        }
        let t = read_tensor(&path)?;
        let want = if modality == Modality::Rgb { l.c_rgb } else { l.c_ir };
        if t.dims().c != want {
            return Err(Error::ShapeMismatch {
                axis: Axis::C,
                left: t.dims().c,
                right: want,
            });
        }
        if let Some(i) = t.first_non_finite() {
            return Err(Error::NonFinite(i));
        }
        levels.push((l.id, t));
    }
    FeaturePyramid::new(modality, levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::LevelConfig;
    use crate::rng::Seed;

    fn cfg() -> FusionConfig {
        FusionConfig {
            input_h: 32,
            input_w: 32,
            batch: 1,
            levels: vec![LevelConfig::new(3, 4, 8), LevelConfig::new(4, 4, 8)],
        }
    }

    #[test]
    fn params_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = FusionParams::<f32>::init(&cfg(), Seed(3)).unwrap();
        let files = save_params(dir.path(), &p).unwrap();
        assert_eq!(files.len(), 2 * 10 * 2);
        assert!(files[0].ends_with("level3.msfd.dw3.weight.icft"));
        assert_eq!(load_params(dir.path(), &cfg()).unwrap(), p);

        let mut other = cfg();
        other.levels[0].c_ir = 16;
        let e = load_params(dir.path(), &other).unwrap_err().to_string();
        assert!(e.contains("weight dims"), "{e}");
    }

    #[test]
    fn pyramid_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pyr = FeaturePyramid::<f32>::random(&cfg(), Modality::Ir, Seed(1)).unwrap();
        write_pyramid(dir.path(), &pyr).unwrap();
        assert_eq!(read_pyramid(dir.path(), Modality::Ir, &cfg()).unwrap(), pyr);
        let e = read_pyramid(dir.path(), Modality::Rgb, &cfg()).unwrap_err();
        assert!(e.to_string().starts_with("channel mismatch on c"), "{e}");
        fs::remove_file(dir.path().join("level4.icft")).unwrap();
        assert!(matches!(
            read_pyramid(dir.path(), Modality::Ir, &cfg()),
            Err(Error::MissingLevel(4))
        ));
    }

    #[test]
    fn non_finite_features_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg();
        c.levels.truncate(1);
        let mut t = Tensor::<f32>::zeros((1, 8, 4, 4)).unwrap();
        t.data_mut()[5] = f32::NAN;
        write_tensor(dir.path().join("level3.icft"), &t).unwrap();
        assert!(matches!(
            read_pyramid(dir.path(), Modality::Ir, &c),
            Err(Error::NonFinite(5))
        ));
    }
}
