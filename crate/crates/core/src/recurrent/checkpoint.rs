//! Plain-text checkpoint format.
//!
//! ```text
//! hsd-recurrent v1
//! precision double
//! cell lstm
//! hidden 128
//! embed_dim 100
//! vocab_size 5000
//! bidirectional true
//! pooling final_state
//! trainable_embedding true
//! tensor embedding 5000 100
//! <one line per row, space-separated values>
//! tensor forward.U_input 128 100
//! ...
//! end
//! ```
//!
//! Tensors follow [`RecurrentClassifier::all_tensors`] order. Values use
//! the shortest representation that parses back to the same float, so a
//! reload is bitwise identical.

use std::fmt::Write as _;
use std::path::Path;

use super::model::{Architecture, CellKind, Pooling, RecurrentClassifier};
use super::tensor::Real;
use crate::error::{Error, Result};

const TAG: &str = "hsd-recurrent v1";

fn shapes<T: Real>(model: &RecurrentClassifier<T>) -> Vec<(usize, usize)> {
    let mut out = vec![(model.embedding.rows, model.embedding.cols)];
    out.extend(model.forward_cell.tensor_shapes());
    if let Some(b) = &model.backward_cell {
        out.extend(b.tensor_shapes());
    }
    out.push((model.head_w.rows, model.head_w.cols));
    out.push((model.head_b.len(), 1));
    out
}

pub fn to_text<T: Real>(model: &RecurrentClassifier<T>) -> String {
    let a = &model.arch;
    let mut s = String::new();
    let _ = writeln!(s, "{}", TAG);
    let _ = writeln!(s, "precision {}", T::PRECISION);
    let _ = writeln!(s, "cell {}", a.cell.name());
    let _ = writeln!(s, "hidden {}", a.hidden);
    let _ = writeln!(s, "embed_dim {}", a.embed_dim);
    let _ = writeln!(s, "vocab_size {}", a.vocab_size);
    let _ = writeln!(s, "bidirectional {}", a.bidirectional);
    let _ = writeln!(s, "pooling {}", a.pooling.name());
    let _ = writeln!(s, "trainable_embedding {}", a.trainable_embedding);
    for ((name, data), (rows, cols)) in model.all_tensors().into_iter().zip(shapes(model)) {
        let _ = writeln!(s, "tensor {} {} {}", name, rows, cols);
        for r in 0..rows {
            let row: Vec<String> = data[r * cols..(r + 1) * cols]
                .iter()
                .map(|v| v.to_string())
                .collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
    }
    s.push_str("end\n");
    s
}

/// Architecture descriptor and stored precision name, without reading the
/// tensors.
pub fn read_descriptor(text: &str) -> Result<(Architecture, String)> {
    let mut lines = text.lines();
    parse_header(&mut lines)
}

fn bad(m: impl Into<String>) -> Error {
    Error::ModelFormat(format!("checkpoint: {}", m.into()))
}

fn parse_header<'a>(lines: &mut impl Iterator<Item = &'a str>) -> Result<(Architecture, String)> {
    if lines.next() != Some(TAG) {
        return Err(bad("missing format tag"));
    }
    let mut field = |key: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| bad(format!("missing {}", key)))?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| bad(format!("expected {:?}, found {:?}", key, line)))
    };
    let num = |v: String, key: &str| v.parse::<usize>().map_err(|_| bad(format!("bad {}", key)));
    let flag = |v: String, key: &str| v.parse::<bool>().map_err(|_| bad(format!("bad {}", key)));
    let precision = field("precision")?;
    let cell = CellKind::parse(&field("cell")?).ok_or_else(|| bad("unknown cell"))?;
    let hidden = num(field("hidden")?, "hidden")?;
    let embed_dim = num(field("embed_dim")?, "embed_dim")?;
    let vocab_size = num(field("vocab_size")?, "vocab_size")?;
    let bidirectional = flag(field("bidirectional")?, "bidirectional")?;
    let pooling = Pooling::parse(&field("pooling")?).ok_or_else(|| bad("unknown pooling"))?;
    let trainable_embedding = flag(field("trainable_embedding")?, "trainable_embedding")?;
    Ok((
        Architecture {
            cell,
            hidden,
            embed_dim,
            vocab_size,
            bidirectional,
            pooling,
            trainable_embedding,
        },
        precision,
    ))
}

/// Parse a checkpoint into a model of precision `T`. Values stored at a
/// different precision are converted.
pub fn from_text<T: Real>(text: &str) -> Result<RecurrentClassifier<T>> {
    let mut lines = text.lines();
    let (arch, _) = parse_header(&mut lines)?;
    let mut model = RecurrentClassifier::<T>::zeros(arch);
    let names: Vec<String> = model.all_tensors().into_iter().map(|(n, _)| n).collect();
    let shapes = shapes(&model);
    for ((tensor, name), (rows, cols)) in model.all_tensors_mut().into_iter().zip(names).zip(shapes)
    {
        let head = lines
            .next()
            .ok_or_else(|| bad(format!("missing tensor {}", name)))?;
        let expected = format!("tensor {} {} {}", name, rows, cols);
        if head != expected {
            return Err(bad(format!("expected {:?}, found {:?}", expected, head)));
        }
        for r in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| bad(format!("{} truncated", name)))?;
            let vals: Vec<&str> = line.split(' ').filter(|v| !v.is_empty()).collect();
            if vals.len() != cols {
                return Err(bad(format!("{} row {}: expected {} values", name, r, cols)));
            }
            for (c, v) in vals.into_iter().enumerate() {
                tensor[r * cols + c] = v
                    .parse::<T>()
                    .map_err(|_| bad(format!("{} row {}: bad value {:?}", name, r, v)))?;
            }
        }
    }
    if lines.next() != Some("end") {
        return Err(bad("missing end marker"));
    }
    model.check_finite()?;
    Ok(model)
}

pub fn save<T: Real>(model: &RecurrentClassifier<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_text(model)).map_err(|e| Error::io(path, e))
}

pub fn load<T: Real>(path: impl AsRef<Path>) -> Result<RecurrentClassifier<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text)
}
