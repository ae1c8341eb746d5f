//! Model checkpoint format "SKC1" (little-endian):
//!
//! ```text
//! magic "SKC1"
//! u32  config_len, config JSON (NetConfig)
//! u32  n_tensors
//! per tensor: u16 name_len, name, u8 ndims, ndims × u32 dims
//! payload: f32 values per tensor, table order
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::atomic_write;

use super::{Layer, Net, NetConfig};

const MAGIC: &[u8; 4] = b"SKC1";

fn tensor_table(net: &Net) -> Vec<(String, Vec<u32>, Vec<f64>)> {
    let mut out = Vec::new();
    for (i, layer) in net.layers.iter().enumerate() {
        match layer {
            Layer::Conv(c) => {
                out.push((
                    format!("layer{i}.weight"),
                    vec![c.c_out as u32, c.kernel as u32, c.kernel as u32, c.c_in as u32],
                    c.weights.clone(),
                ));
                out.push((format!("layer{i}.bias"), vec![c.c_out as u32], c.bias.clone()));
            }
            Layer::Fc(f) => {
                out.push((
                    format!("layer{i}.weight"),
                    vec![f.n_out() as u32, f.n_in() as u32],
                    f.weights.clone(),
                ));
                out.push((format!("layer{i}.bias"), vec![f.n_out() as u32], f.bias.clone()));
            }
            _ => {}
        }
    }
    out
}

pub fn save(net: &Net, path: impl AsRef<Path>) -> Result<()> {
    let cfg = net.config.as_ref().ok_or_else(|| {
        Error::Input("only networks built from a NetConfig can be checkpointed".into())
    })?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    let json = serde_json::to_vec(cfg)?;
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    let table = tensor_table(net);
    buf.extend_from_slice(&(table.len() as u32).to_le_bytes());
    for (name, dims, _) in &table {
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(dims.len() as u8);
        for d in dims {
            buf.extend_from_slice(&d.to_le_bytes());
        }
    }
    for (_, _, values) in &table {
        for v in values {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    atomic_write(path, &buf)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format {
                format: "SKC1".into(),
                detail: "truncated checkpoint".into(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

pub fn load(path: impl AsRef<Path>) -> Result<Net> {
    let bytes = std::fs::read(path.as_ref())?;
    let mut r = Reader { buf: &bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format {
            format: "SKC1".into(),
            detail: "bad magic".into(),
        });
    }
    let json_len = r.u32()? as usize;
    let cfg: NetConfig = serde_json::from_slice(r.take(json_len)?)?;
    let n_tensors = r.u32()? as usize;
    let mut table = Vec::with_capacity(n_tensors);
    for _ in 0..n_tensors {
        let name_len = r.u16()? as usize;
        let name = String::from_utf8_lossy(r.take(name_len)?).into_owned();
        let ndims = r.u8()? as usize;
        let mut dims = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            dims.push(r.u32()?);
        }
        table.push((name, dims));
    }
    let mut net = Net::new(&cfg, 0)?;
    let expected = tensor_table(&net);
    if expected.len() != table.len() {
        return Err(Error::Format {
            format: "SKC1".into(),
            detail: format!(
                "tensor count {} does not match architecture ({})",
                table.len(),
                expected.len()
            ),
        });
    }
    for ((name, dims), (want_name, want_dims, values)) in table.iter().zip(&expected) {
        if name != want_name || dims != want_dims {
            return Err(Error::Format {
                format: "SKC1".into(),
                detail: format!("tensor {name} {dims:?} does not match {want_name} {want_dims:?}"),
            });
        }
        let _ = values;
    }
    // payload in table order
    let mut params: Vec<Vec<f64>> = Vec::with_capacity(expected.len());
    for (_, dims) in &table {
        let n: usize = dims.iter().map(|&d| d as usize).product();
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            let b = r.take(4)?;
            vals.push(f32::from_le_bytes(b.try_into().unwrap()) as f64);
        }
        params.push(vals);
    }
    let mut it = params.into_iter();
    for layer in &mut net.layers {
        match layer {
            Layer::Conv(c) => {
                c.weights = it.next().expect("table length verified");
                c.bias = it.next().expect("table length verified");
            }
            Layer::Fc(f) => {
                f.weights = it.next().expect("table length verified");
                f.bias = it.next().expect("table length verified");
            }
            _ => {}
        }
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor3;

    #[test]
    fn checkpoint_roundtrip_preserves_forward() {
        let cfg = NetConfig {
            input_t: 8,
            input_k: 8,
            input_c: 2,
            encoder_widths: [4, 4, 4],
            latent: (2, 2, 4),
            decoder_widths: [4, 4, 4, 4, 4, 4],
            out_h: 8,
            out_w: 8,
            n_joints: 3,
            heatmap_sigma_px: 1.0,
        };
        let net = Net::new(&cfg, 42).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.skc");
        save(&net, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(loaded.config.as_ref(), Some(&cfg));
        let x = Tensor3::from_vec(8, 8, 2, (0..128).map(|i| (i as f64 * 0.37).sin()).collect());
        let a = net.forward(&x);
        let b = loaded.forward(&x);
        for (p, q) in a.data.iter().zip(&b.data) {
            // f32 payload quantization
            assert!((p - q).abs() < 1e-4, "{p} vs {q}");
        }
        // a second save/load is bit-stable
        let path2 = dir.path().join("model2.skc");
        save(&loaded, &path2).unwrap();
        let again = load(&path2).unwrap();
        assert_eq!(loaded, again);
    }

    #[test]
    fn corrupted_checkpoint_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.skc");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(load(&path), Err(Error::Format { .. })));
    }
}
