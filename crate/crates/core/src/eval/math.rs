use num::{BigInt, BigRational, Zero};

/// Canonical form used for equivalence: an exact rational when the answer
/// parses as one, otherwise a lightly normalized string.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MathCanon {
    Rational(BigRational),
    Text(String),
}

impl MathCanon {
    pub fn key(&self) -> String {
        match self {
            MathCanon::Rational(r) => format!("#{r}"),
            MathCanon::Text(t) => t.clone(),
        }
    }
}

fn strip_noise(s: &str) -> String {
    s.replace("\\$", "")
        .chars()
        .filter(|c| !c.is_whitespace() && !matches!(c, ',' | '$' | '€' | '£' | '¥'))
        .collect()
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().ok()?;
    let denom = num::pow(BigInt::from(10), frac_part.len());
    let value = BigRational::new(numer, denom);
    Some(if neg { -value } else { value })
}

fn parse_frac_command(s: &str) -> Option<(String, String)> {
    let rest = ["\\frac", "\\dfrac", "\\tfrac"]
        .iter()
        .find_map(|cmd| s.strip_prefix(cmd))?;
    let (num, rest) = braced(rest)?;
    let (den, rest) = braced(rest)?;
    rest.is_empty().then_some((num, den))
}

fn braced(s: &str) -> Option<(String, &str)> {
    let inner = s.strip_prefix('{')?;
    let mut depth = 1usize;
    for (i, c) in inner.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some((inner[..i].to_string(), &inner[i + 1..]));
                }
            }
            _ => {}
        }
    }
    None
}

/// Parses integers, decimals, `p/q` and `\frac{p}{q}` (with optional leading sign).
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.strip_suffix('.').unwrap_or(s);
    if let Some(v) = parse_decimal(s) {
        return Some(v);
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (num, den) = if let Some(pair) = parse_frac_command(body) {
        pair
    } else {
        let (n, d) = body.split_once('/')?;
        (n.to_string(), d.to_string())
    };
    let num = parse_decimal(&num)?;
    let den = parse_decimal(&den)?;
    if den.is_zero() {
        return None;
    }
    let value = num / den;
    Some(if neg { -value } else { value })
}

fn strip_outer_braces(mut s: &str) -> &str {
    while let Some((inner, rest)) = braced(s) {
        if !rest.is_empty() {
            break;
        }
        s = &s[1..=inner.len()];
    }
    s
}

pub fn canonical_math(answer: &str) -> MathCanon {
    let cleaned = strip_noise(answer);
    if let Some(r) = parse_rational(strip_outer_braces(&cleaned)) {
        return MathCanon::Rational(r);
    }
    let lowered = cleaned.to_lowercase().replace("\\left", "").replace("\\right", "");
    let trimmed = lowered.strip_suffix('.').unwrap_or(&lowered);
    MathCanon::Text(strip_outer_braces(trimmed).to_string())
}

/// Final-answer equivalence: exact rational comparison where both sides
/// parse, otherwise comparison of the normalized strings.
pub fn math_equiv(a: &str, b: &str) -> bool {
    canonical_math(a) == canonical_math(b)
}
