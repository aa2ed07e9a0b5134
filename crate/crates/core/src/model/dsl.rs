//! Compact architecture notation.
//!
//! Layers are joined by `-`:
//!
//! | token | layer |
//! |-------|-------|
//! | `FC(n)` | fully connected, ReLU |
//! | `C(feat,kt,kf,st,sf)` | convolution, ReLU |
//! | `L(n)` | low-rank linear |
//! | `LSTM(n)` / `LSTM(n), Projection(p)` | LSTM cell, projected with peepholes |
//! | `GRU(n)` | GRU cell |
//! | `DSC(feat,k,s)` | depthwise separable convolution |
//! | `AvgPool` | global average pool |
//! | `BN` | folded batch norm |
//!
//! Numbers are positive decimals without leading zeros. The output
//! classifier is implicit.

use super::{Family, Layer, ModelSpec, MAX_DIM};
use crate::error::{Error, Result};

struct Cursor<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("'{}'", c as char)))
        }
    }

    fn unexpected(&self, wanted: &str) -> Error {
        match self.peek() {
            Some(c) if c.is_ascii_graphic() => {
                Error::parse(self.pos, format!("expected {wanted}, found '{}'", c as char))
            }
            Some(_) => Error::parse(self.pos, format!("expected {wanted}, found non-printable byte")),
            None => Error::parse(self.pos, format!("expected {wanted}, found end of input")),
        }
    }

    fn ident(&mut self) -> Result<(usize, &'a str)> {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.unexpected("layer name"));
        }
        // Only ASCII letters were consumed.
        Ok((start, std::str::from_utf8(&self.src[start..self.pos]).unwrap()))
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let digits = &self.src[start..self.pos];
        if digits.is_empty() {
            return Err(self.unexpected("number"));
        }
        if digits[0] == b'0' {
            return Err(Error::parse(start, "numbers must be positive without leading zeros"));
        }
        let value = digits
            .iter()
            .try_fold(0usize, |acc, d| acc.checked_mul(10)?.checked_add(usize::from(d - b'0')))
            .filter(|&v| v <= MAX_DIM)
            .ok_or_else(|| Error::parse(start, format!("number exceeds {MAX_DIM}")))?;
        Ok(value)
    }

    fn args(&mut self) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        if !self.eat(b'(') {
            return Ok(out);
        }
        out.push(self.number()?);
        while self.eat(b',') {
            out.push(self.number()?);
        }
        self.expect(b')')?;
        Ok(out)
    }
}

fn arity(name: &str) -> Option<usize> {
    Some(match name {
        "FC" | "L" | "LSTM" | "GRU" => 1,
        "C" => 5,
        "DSC" => 3,
        "AvgPool" | "BN" => 0,
        _ => return None,
    })
}

fn parse_layer(cur: &mut Cursor<'_>, family: Family) -> Result<Layer> {
    let (start, name) = cur.ident()?;
    let want = arity(name).ok_or_else(|| Error::parse(start, format!("unknown layer '{name}'")))?;
    let args_at = cur.pos;
    let a = cur.args()?;
    if a.len() != want {
        return Err(Error::parse(
            args_at,
            format!("{name} takes {want} argument(s), got {}", a.len()),
        ));
    }
    Ok(match name {
        "FC" => Layer::FullyConnected { units: a[0] },
        "L" => Layer::LowRankLinear { units: a[0] },
        "GRU" => Layer::Gru { cells: a[0] },
        "C" => Layer::Conv2d {
            features: a[0],
            kernel_t: a[1],
            kernel_f: a[2],
            stride_t: a[3],
            stride_f: a[4],
            padding: family.conv_padding(),
        },
        "DSC" => Layer::DepthwiseSeparable { features: a[0], kernel: a[1], stride: a[2] },
        "AvgPool" => Layer::AvgPool,
        "BN" => Layer::BatchNorm,
        "LSTM" => {
            let save = cur.pos;
            let projection = if cur.eat(b',') {
                let (at, word) = cur.ident()?;
                if word != "Projection" {
                    return Err(Error::parse(at, format!("expected 'Projection', found '{word}'")));
                }
                let p = cur.args()?;
                if p.len() != 1 {
                    return Err(Error::parse(at, "Projection takes 1 argument"));
                }
                Some(p[0])
            } else {
                cur.pos = save;
                None
            };
            match (family, projection) {
                (Family::BasicLstm, Some(_)) => {
                    return Err(Error::parse(save, "basic LSTM cells have no projection"))
                }
                (Family::Lstm, projection) | (_, projection @ Some(_)) => {
                    Layer::Lstm { cells: a[0], projection }
                }
                _ => Layer::BasicLstm { cells: a[0] },
            }
        }
        _ => unreachable!("arity table covers all names"),
    })
}

/// Parses the notation into a validated model ending in a `classes`-way classifier.
pub fn parse_model_dsl(
    text: &str,
    family: Family,
    frames: usize,
    coeffs: usize,
    classes: usize,
) -> Result<ModelSpec> {
    let mut cur = Cursor { src: text.as_bytes(), pos: 0 };
    cur.skip_ws();
    if cur.peek().is_none() {
        return Err(Error::parse(0, "empty model description"));
    }
    let mut layers = vec![parse_layer(&mut cur, family)?];
    loop {
        cur.skip_ws();
        match cur.peek() {
            None => break,
            Some(b'-') => {
                cur.pos += 1;
                layers.push(parse_layer(&mut cur, family)?);
            }
            Some(_) => return Err(cur.unexpected("'-' or end of input")),
        }
    }
    let end = cur.pos;
    ModelSpec::new(family, frames, coeffs, classes, layers).map_err(|e| match e {
        Error::Parse { .. } => e,
        other => Error::parse(end, other.to_string()),
    })
}

pub(super) fn print_layer(layer: &Layer) -> String {
    match *layer {
        Layer::FullyConnected { units } => format!("FC({units})"),
        Layer::LowRankLinear { units } => format!("L({units})"),
        Layer::Conv2d { features, kernel_t, kernel_f, stride_t, stride_f, .. } => {
            format!("C({features},{kernel_t},{kernel_f},{stride_t},{stride_f})")
        }
        Layer::DepthwiseSeparable { features, kernel, stride } => {
            format!("DSC({features},{kernel},{stride})")
        }
        Layer::AvgPool => "AvgPool".into(),
        Layer::BatchNorm => "BN".into(),
        Layer::BasicLstm { cells } | Layer::Lstm { cells, projection: None } => {
            format!("LSTM({cells})")
        }
        Layer::Lstm { cells, projection: Some(p) } => format!("LSTM({cells}), Projection({p})"),
        Layer::Gru { cells } => format!("GRU({cells})"),
        Layer::Logits { .. } | Layer::Softmax { .. } => String::new(),
    }
}

/// Canonical notation of the hidden layers.
pub fn print_model_dsl(model: &ModelSpec) -> String {
    model.hidden_layers().iter().map(print_layer).collect::<Vec<_>>().join("-")
}
