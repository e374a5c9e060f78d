//! Plain-text parameter files.
//!
//! ```text
//! microgrid-net 1
//! inputs=12
//! hidden=64,64
//! actions=9
//! atoms=51
//! dueling=true
//! noisy=true
//! sigma0=0.5
//! output=identity
//! tensor 0 12 64
//! <64 whitespace-separated values per line, one line per row>
//! tensor 1 1 64
//! ...
//! ```
//!
//! Tensors appear in [`Network::params`] order. Values use Rust's shortest
//! round-trip formatting, so a save/load cycle is bit-exact. Noise samples
//! are not stored; loaded networks start with noise cleared.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Network, NetworkSpec, NnError, OutputActivation};
use crate::rng::seeded;

const MAGIC: &str = "microgrid-net 1";

pub fn write_network<W: Write>(net: &Network, mut w: W) -> Result<(), NnError> {
    let s = net.spec();
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "inputs={}", s.inputs)?;
    let hidden: Vec<String> = s.hidden.iter().map(|h| h.to_string()).collect();
    writeln!(w, "hidden={}", hidden.join(","))?;
    writeln!(w, "actions={}", s.actions)?;
    writeln!(w, "atoms={}", s.atoms)?;
    writeln!(w, "dueling={}", s.dueling)?;
    writeln!(w, "noisy={}", s.noisy)?;
    writeln!(w, "sigma0={}", s.sigma0)?;
    let output = match s.output {
        OutputActivation::Identity => "identity",
        OutputActivation::Tanh => "tanh",
    };
    writeln!(w, "output={output}")?;
    for (k, p) in net.params().iter().enumerate() {
        writeln!(w, "tensor {k} {} {}", p.value.nrows(), p.value.ncols())?;
        for row in p.value.outer_iter() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<(), NnError> {
    write_network(net, BufWriter::new(File::create(path)?))
}

fn bad(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

fn field<'a>(lines: &mut impl Iterator<Item = String>, key: &'a str) -> Result<String, NnError> {
    let line = lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| bad(format!("expected {key}=..., got {line:?}")))?;
    if k.trim() != key {
        return Err(bad(format!("expected {key}, got {k}")));
    }
    Ok(v.trim().to_string())
}

fn parse<T: std::str::FromStr>(v: &str, key: &str) -> Result<T, NnError> {
    v.parse()
        .map_err(|_| bad(format!("invalid value {v:?} for {key}")))
}

pub fn read_network<R: Read>(r: R) -> Result<Network, NnError> {
    let mut lines = BufReader::new(r)
        .lines()
        .map_while(Result::ok)
        .filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(l) if l.trim() == MAGIC => {}
        other => return Err(bad(format!("bad header {other:?}"))),
    }
    let inputs = parse(&field(&mut lines, "inputs")?, "inputs")?;
    let hidden_raw = field(&mut lines, "hidden")?;
    let hidden = if hidden_raw.is_empty() {
        Vec::new()
    } else {
        hidden_raw
            .split(',')
            .map(|h| parse(h.trim(), "hidden"))
            .collect::<Result<Vec<usize>, _>>()?
    };
    let actions = parse(&field(&mut lines, "actions")?, "actions")?;
    let atoms = parse(&field(&mut lines, "atoms")?, "atoms")?;
    let dueling = parse(&field(&mut lines, "dueling")?, "dueling")?;
    let noisy = parse(&field(&mut lines, "noisy")?, "noisy")?;
    let sigma0 = parse(&field(&mut lines, "sigma0")?, "sigma0")?;
    let output = match field(&mut lines, "output")?.as_str() {
        "identity" => OutputActivation::Identity,
        "tanh" => OutputActivation::Tanh,
        other => return Err(bad(format!("unknown output activation {other:?}"))),
    };
    let spec = NetworkSpec {
        inputs,
        hidden,
        actions,
        atoms,
        dueling,
        noisy,
        sigma0,
        output,
    };
    let mut net = Network::new(spec, &mut seeded(0))?;
    let count = net.params().len();
    for (k, p) in net.params_mut().into_iter().enumerate() {
        let header = lines
            .next()
            .ok_or_else(|| bad(format!("missing tensor {k} of {count}")))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let shape = (p.value.nrows(), p.value.ncols());
        if parts.len() != 4 || parts[0] != "tensor" {
            return Err(bad(format!("bad tensor header {header:?}")));
        }
        let rows: usize = parse(parts[2], "rows")?;
        let cols: usize = parse(parts[3], "cols")?;
        if parse::<usize>(parts[1], "index")? != k || (rows, cols) != shape {
            return Err(bad(format!(
                "tensor {k}: expected shape {shape:?}, got {header:?}"
            )));
        }
        for r in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| bad(format!("tensor {k} truncated at row {r}")))?;
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|v| parse(v, "value"))
                .collect::<Result<_, _>>()?;
            if values.len() != cols {
                return Err(bad(format!("tensor {k} row {r}: {} values", values.len())));
            }
            for (c, v) in values.into_iter().enumerate() {
                p.value[[r, c]] = v;
            }
        }
    }
    if let Some(extra) = lines.next() {
        return Err(bad(format!("trailing data {extra:?}")));
    }
    Ok(net)
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network, NnError> {
    read_network(File::open(path)?)
}
