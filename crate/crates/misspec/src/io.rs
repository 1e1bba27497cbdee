//! Text formats: instance documents and aliased datasets.
//!
//! Instance grammar (line based, `#` starts a comment, tokens separated by whitespace):
//!
//! ```text
//! gamma <decimal>
//! states <S>
//! P
//! <S rows of S decimals>
//! r <S tokens, each a decimal or `ber <p>`>
//! mu <S decimals>
//! features <d> [unbounded]
//! <S rows of d decimals>
//! ```
//!
//! The optional `unbounded` flag waives the feature row-norm bound.
//!
//! Datasets are one sample per line, `d` entries of `phi`, the reward, then `d`
//! entries of `phi'`, after the header `# aliased d=<d> n=<n> seed=<seed>`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::estimators::{AliasedSample, Dataset};
use crate::linalg::{Mat, Vector};
use crate::mrp::{ProblemInstance, RewardModel};

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    line: usize,
    col: usize,
}

struct Lines<'a> {
    lines: Vec<(usize, Vec<Token<'a>>)>,
    pos: usize,
    last_line: usize,
}

fn tokenize(text: &str) -> Lines<'_> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("");
        let mut toks = Vec::new();
        let mut start = None;
        for (j, ch) in body.char_indices().chain(std::iter::once((body.len(), ' '))) {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some(j),
                (true, Some(s)) => {
                    toks.push(Token { text: &body[s..j], line: i + 1, col: body[..s].chars().count() + 1 });
                    start = None;
                }
                _ => {}
            }
        }
        if !toks.is_empty() {
            lines.push((i + 1, toks));
        }
    }
    let last_line = text.lines().count().max(1);
    Lines { lines, pos: 0, last_line }
}

fn perr(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, col, msg: msg.into() }
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, Vec<Token<'a>>)> {
        let out = self
            .lines
            .get(self.pos)
            .cloned()
            .ok_or_else(|| perr(self.last_line, 1, format!("unexpected end of input, expected {what}")))?;
        self.pos += 1;
        Ok(out)
    }

    /// A line starting with `keyword`; returns the remaining tokens.
    fn keyword(&mut self, keyword: &str) -> Result<(usize, Vec<Token<'a>>)> {
        let (line, toks) = self.next(&format!("'{keyword}'"))?;
        if toks[0].text != keyword {
            return Err(perr(line, toks[0].col, format!("expected '{keyword}', found '{}'", toks[0].text)));
        }
        Ok((line, toks[1..].to_vec()))
    }
}

fn decimal(t: &Token) -> Result<f64> {
    match t.text.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(perr(t.line, t.col, format!("'{}' is not a finite decimal", t.text))),
    }
}

fn count(t: &Token) -> Result<usize> {
    t.text.parse::<usize>().map_err(|_| perr(t.line, t.col, format!("'{}' is not a count", t.text)))
}

fn exactly(line: usize, toks: &[Token], n: usize, what: &str) -> Result<()> {
    if toks.len() != n {
        let col = toks.get(n).or(toks.last()).map_or(1, |t| t.col);
        return Err(Error::Dimension(format!(
            "line {line}, column {col}: {what} has {} entries, expected {n}",
            toks.len()
        )));
    }
    Ok(())
}

fn row(line: usize, toks: &[Token], n: usize, what: &str) -> Result<Vec<f64>> {
    exactly(line, toks, n, what)?;
    toks.iter().map(decimal).collect()
}

fn single<'a>(lines: &mut Lines<'a>, keyword: &str) -> Result<Token<'a>> {
    let (line, rest) = lines.keyword(keyword)?;
    exactly(line, &rest, 1, keyword)?;
    Ok(rest[0])
}

/// Parses an instance document. Rows and `mu` are renormalized on ingestion.
pub fn parse_instance(text: &str) -> Result<ProblemInstance> {
    let mut lines = tokenize(text);
    let gamma = decimal(&single(&mut lines, "gamma")?)?;
    let s_tok = single(&mut lines, "states")?;
    let s = count(&s_tok)?;
    if s == 0 {
        return Err(perr(s_tok.line, s_tok.col, "state count must be positive"));
    }
    let (line, rest) = lines.keyword("P")?;
    exactly(line, &rest, 0, "P header")?;
    let mut p = Mat::zeros(s, s);
    for i in 0..s {
        let (line, toks) = lines.next("a transition row")?;
        for (j, x) in row(line, &toks, s, &format!("transition row {}", i + 1))?.into_iter().enumerate() {
            p[(i, j)] = x;
        }
    }

    let (line, rest) = lines.keyword("r")?;
    let mut rewards = Vec::with_capacity(s);
    let mut k = 0;
    while k < rest.len() {
        if rest[k].text == "ber" {
            let t = rest.get(k + 1).ok_or_else(|| perr(line, rest[k].col, "'ber' needs a probability"))?;
            rewards.push(RewardModel::Bernoulli(decimal(t)?));
            k += 2;
        } else {
            rewards.push(RewardModel::Deterministic(decimal(&rest[k])?));
            k += 1;
        }
    }
    if rewards.len() != s {
        return Err(Error::Dimension(format!("line {line}: {} reward laws, expected {s}", rewards.len())));
    }

    let (line, rest) = lines.keyword("mu")?;
    let mu = Vector::from_vec(row(line, &rest, s, "mu")?);

    let (line, rest) = lines.keyword("features")?;
    if rest.is_empty() || rest.len() > 2 {
        return Err(perr(line, 1, "expected 'features <d> [unbounded]'"));
    }
    let d = count(&rest[0])?;
    let unbounded = match rest.get(1) {
        None => false,
        Some(t) if t.text == "unbounded" => true,
        Some(t) => return Err(perr(t.line, t.col, format!("unknown flag '{}'", t.text))),
    };
    let mut phi = Mat::zeros(s, d);
    for i in 0..s {
        let (line, toks) = lines.next("a feature row")?;
        for (j, x) in row(line, &toks, d, &format!("feature row {}", i + 1))?.into_iter().enumerate() {
            phi[(i, j)] = x;
        }
    }
    if let Some((line, toks)) = lines.lines.get(lines.pos) {
        return Err(perr(*line, toks[0].col, format!("unexpected trailing content '{}'", toks[0].text)));
    }
    if unbounded {
        ProblemInstance::new_unnormalized(p, rewards, gamma, phi, mu)
    } else {
        ProblemInstance::new(p, rewards, gamma, phi, mu)
    }
}

fn push_row<'a>(out: &mut String, it: impl IntoIterator<Item = &'a f64>) {
    let strs: Vec<String> = it.into_iter().map(|x| format!("{x}")).collect();
    out.push_str(&strs.join(" "));
    out.push('\n');
}

/// Canonical document for an instance; values are printed at full precision.
pub fn render_instance(inst: &ProblemInstance) -> String {
    let s = inst.n_states();
    let mut out = String::new();
    let _ = writeln!(out, "gamma {}", inst.gamma());
    let _ = writeln!(out, "states {s}");
    out.push_str("P\n");
    for r in inst.p().row_iter() {
        push_row(&mut out, r.iter());
    }
    let rw: Vec<String> = inst
        .rewards()
        .iter()
        .map(|r| match r {
            RewardModel::Deterministic(v) => format!("{v}"),
            RewardModel::Bernoulli(p) => format!("ber {p}"),
        })
        .collect();
    let _ = writeln!(out, "r {}", rw.join(" "));
    out.push_str("mu ");
    push_row(&mut out, inst.mu().weights().iter());
    let flag = if inst.features().is_bounded() { "" } else { " unbounded" };
    let _ = writeln!(out, "features {}{flag}", inst.dim());
    for r in inst.phi().row_iter() {
        push_row(&mut out, r.iter());
    }
    out
}

pub fn write_dataset(data: &Dataset) -> String {
    let mut out = format!("# aliased d={} n={} seed={}\n", data.d, data.n(), data.seed);
    for smp in &data.samples {
        let mut vals: Vec<f64> = smp.phi.iter().copied().collect();
        vals.push(smp.reward);
        vals.extend(smp.phi_next.iter());
        push_row(&mut out, vals.iter());
    }
    out
}

fn header_field(t: &Token, key: &str) -> Result<u64> {
    t.text
        .strip_prefix(key)
        .and_then(|v| v.strip_prefix('='))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| perr(t.line, t.col, format!("expected '{key}=<int>', found '{}'", t.text)))
}

pub fn read_dataset(text: &str) -> Result<Dataset> {
    let mut it = text.lines().enumerate();
    let (_, head) = it.next().ok_or_else(|| perr(1, 1, "empty dataset"))?;
    let toks = tokenize(head.trim_start_matches('#').trim_start()).lines.pop().map(|(_, t)| t).unwrap_or_default();
    if toks.len() != 4 || toks[0].text != "aliased" || !head.starts_with('#') {
        return Err(perr(1, 1, "expected header '# aliased d=<d> n=<n> seed=<seed>'"));
    }
    let d = header_field(&toks[1], "d")? as usize;
    let n = header_field(&toks[2], "n")? as usize;
    let seed = header_field(&toks[3], "seed")?;
    let mut samples = Vec::with_capacity(n);
    for (i, line) in it {
        let toks = tokenize(line).lines.pop().map(|(_, t)| t).unwrap_or_default();
        if toks.is_empty() {
            continue;
        }
        let toks: Vec<Token> = toks.into_iter().map(|t| Token { line: i + 1, ..t }).collect();
        let v = row(i + 1, &toks, 2 * d + 1, "sample")?;
        samples.push(AliasedSample {
            phi: Vector::from_row_slice(&v[..d]),
            reward: v[d],
            phi_next: Vector::from_row_slice(&v[d + 1..]),
        });
    }
    if samples.len() != n {
        return Err(Error::Dimension(format!("dataset declares n={n} but has {} samples", samples.len())));
    }
    Ok(Dataset { d, seed, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::sample_dataset;
    use crate::instances::gen_five_state_fixed;
    use crate::linalg;
    use crate::moments;

    const DOC: &str = "# two states\ngamma 0.9\nstates 2\nP\n0 1\n0 1   # absorbing\nr 1 ber 0.25\nmu 0.5 0.5\nfeatures 1\n1\n1\n";

    #[test]
    fn parses_reference_document() {
        let i = parse_instance(DOC).unwrap();
        assert_eq!(i.gamma(), 0.9);
        assert_eq!(i.rewards()[1], RewardModel::Bernoulli(0.25));
        assert_eq!(i.phi()[(1, 0)], 1.0);
    }

    #[test]
    fn fixed_instance_round_trips() {
        let i = gen_five_state_fixed().unwrap();
        let text = render_instance(&i);
        let j = parse_instance(&text).unwrap();
        assert!(linalg::max_abs_mat(&(i.sigma() - j.sigma())) <= 1e-12);
        assert!(linalg::max_abs_mat(&(moments::a_matrix(&i) - moments::a_matrix(&j))) <= 1e-12);
        assert_eq!(render_instance(&j), text);
    }

    #[test]
    fn truncated_rows_are_renormalized() {
        let doc = DOC.replace("0 1   # absorbing", "0.0005 0.999");
        let i = parse_instance(&doc).unwrap();
        assert!((i.p().row(1).sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn error_paths() {
        let neg = DOC.replace("mu 0.5 0.5", "mu -0.5 1.5");
        assert!(matches!(parse_instance(&neg), Err(Error::Invariant(_))));
        let bad = DOC.replace("gamma 0.9", "gamma zero");
        assert!(matches!(parse_instance(&bad), Err(Error::Parse { line: 2, col: 7, .. })));
        let short = DOC.replace("mu 0.5 0.5", "mu 1");
        assert!(matches!(parse_instance(&short), Err(Error::Dimension(_))));
        let nan = DOC.replace("mu 0.5 0.5", "mu NaN 0.5");
        assert!(matches!(parse_instance(&nan), Err(Error::Parse { .. })));
        let cut = DOC.lines().take(6).collect::<Vec<_>>().join("\n");
        assert!(matches!(parse_instance(&cut), Err(Error::Parse { .. })));
        let big = DOC.replace("features 1\n1\n1", "features 1\n2\n1");
        assert!(matches!(parse_instance(&big), Err(Error::Invariant(_))));
        assert!(parse_instance(&DOC.replace("features 1\n1\n1", "features 1 unbounded\n2\n1")).is_ok());
    }

    #[test]
    fn dataset_round_trip() {
        let i = parse_instance(DOC).unwrap();
        let data = sample_dataset(&i, 50, 3);
        let text = write_dataset(&data);
        assert!(text.starts_with("# aliased d=1 n=50 seed=3\n"));
        assert_eq!(read_dataset(&text).unwrap(), data);
        assert!(read_dataset("# aliased d=1 n=2 seed=0\n1 0 1\n").is_err());
    }
}
