//! Model strings of the form `y x1 x2 (c1-c50 w*) (d1 d2 = z*)`.
//!
//! The first bare name is the dependent variable and later bare names are
//! unpenalized regressors of interest. The first parenthesized group without
//! `=` holds the penalized controls. A group with `=` lists endogenous
//! regressors on the left and their excluded instruments on the right.

use glob::Pattern;
use hdselect_core::dataset::{EstimationKind, ModelSpec};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Equals,
    Word(String),
}

fn tokenize(model: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut Vec<Token>| {
        if !word.is_empty() {
            out.push(Token::Word(std::mem::take(word)));
        }
    };
    for ch in model.chars() {
        match ch {
            '(' | ')' | '=' => {
                flush(&mut word, &mut out);
                out.push(match ch {
                    '(' => Token::Open,
                    ')' => Token::Close,
                    _ => Token::Equals,
                });
            }
            c if c.is_whitespace() || c == ',' => flush(&mut word, &mut out),
            c => word.push(c),
        }
    }
    flush(&mut word, &mut out);
    out
}

/// Expand one token against the header: an exact column name, a glob
/// (`c*`, `z?`), or a range `a-b` taken in header order.
pub fn expand_token(token: &str, header: &[String]) -> CliResult<Vec<String>> {
    if header.iter().any(|h| h == token) {
        return Ok(vec![token.to_string()]);
    }
    if token.contains(['*', '?', '[']) {
        let pat = Pattern::new(token)
            .map_err(|e| CliError::Usage(format!("bad pattern {token:?}: {e}")))?;
        let hits: Vec<String> = header.iter().filter(|h| pat.matches(h)).cloned().collect();
        if hits.is_empty() {
            return Err(CliError::Usage(format!("pattern {token:?} matches no column")));
        }
        return Ok(hits);
    }
    for (at, _) in token.match_indices('-') {
        let (a, b) = (&token[..at], &token[at + 1..]);
        let ia = header.iter().position(|h| h == a);
        let ib = header.iter().position(|h| h == b);
        if let (Some(ia), Some(ib)) = (ia, ib) {
            if ia > ib {
                return Err(CliError::Usage(format!(
                    "range {token:?} runs backwards in the header"
                )));
            }
            return Ok(header[ia..=ib].to_vec());
        }
    }
    Err(CliError::Usage(format!("unknown column {token:?}")))
}

/// Expand a list of tokens, keeping first occurrences only.
pub fn expand_list<S: AsRef<str>>(tokens: &[S], header: &[String]) -> CliResult<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    for t in tokens {
        for part in t.as_ref().split(|c: char| c.is_whitespace() || c == ',') {
            if part.is_empty() {
                continue;
            }
            for name in expand_token(part, header)? {
                if !out.contains(&name) {
                    out.push(name);
                }
            }
        }
    }
    Ok(out)
}

pub fn parse_model(model: &str, header: &[String]) -> CliResult<ModelSpec> {
    let tokens = tokenize(model);
    let mut spec = ModelSpec::default();
    let mut seen_controls = false;
    let mut i = 0;
    while i < tokens.len() {
        match &tokens[i] {
            Token::Word(w) => {
                if spec.dependent.is_empty() {
                    if !header.iter().any(|h| h == w) {
                        return Err(CliError::Usage(format!(
                            "dependent variable {w:?} is not a column"
                        )));
                    }
                    spec.dependent = w.clone();
                } else {
                    push_unique(&mut spec.focal_unpenalized, expand_token(w, header)?);
                }
                i += 1;
            }
            Token::Open => {
                if spec.dependent.is_empty() {
                    return Err(CliError::Usage("model must start with the dependent variable".into()));
                }
                let close = tokens[i + 1..]
                    .iter()
                    .position(|t| matches!(t, Token::Close | Token::Open))
                    .map(|k| k + i + 1)
                    .filter(|&k| tokens[k] == Token::Close)
                    .ok_or_else(|| CliError::Usage("unbalanced or nested parentheses".into()))?;
                let group = &tokens[i + 1..close];
                let eq: Vec<usize> = (0..group.len()).filter(|&k| group[k] == Token::Equals).collect();
                let words = |part: &[Token]| -> Vec<String> {
                    part.iter()
                        .filter_map(|t| match t {
                            Token::Word(w) => Some(w.clone()),
                            _ => None,
                        })
                        .collect()
                };
                match eq.as_slice() {
                    [] => {
                        if seen_controls {
                            return Err(CliError::Usage(
                                "only one group of penalized controls is allowed".into(),
                            ));
                        }
                        seen_controls = true;
                        push_unique(&mut spec.hd_controls_penalized, expand_list(&words(group), header)?);
                    }
                    [k] => {
                        let lhs = expand_list(&words(&group[..*k]), header)?;
                        let rhs = expand_list(&words(&group[k + 1..]), header)?;
                        if lhs.is_empty() {
                            return Err(CliError::Usage("instrument group without endogenous variables".into()));
                        }
                        if rhs.is_empty() {
                            return Err(CliError::Usage(format!(
                                "endogenous {} given without instruments",
                                lhs.join(" ")
                            )));
                        }
                        push_unique(&mut spec.endogenous, lhs);
                        push_unique(&mut spec.instruments_penalized, rhs);
                    }
                    _ => return Err(CliError::Usage("more than one '=' in a group".into())),
                }
                i = close + 1;
            }
            Token::Close => return Err(CliError::Usage("unbalanced ')'".into())),
            Token::Equals => return Err(CliError::Usage("'=' outside parentheses".into())),
        }
    }
    if spec.dependent.is_empty() {
        return Err(CliError::Usage("empty model".into()));
    }
    // role disjointness and endogenous/instrument pairing; estimator-specific
    // requirements are checked once the subcommand is known
    spec.validate(EstimationKind::Lasso, Some(header))?;
    Ok(spec)
}

fn push_unique(dst: &mut Vec<String>, src: Vec<String>) {
    for s in src {
        if !dst.contains(&s) {
            dst.push(s);
        }
    }
}
