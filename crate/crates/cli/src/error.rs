use serde::Serialize;

/// Invalid input or configuration.
pub const EXIT_VALIDATION: u8 = 1;
/// Failure while computing from valid input.
pub const EXIT_COMPUTE: u8 = 2;

/// A failure reported as one JSON record on standard error.
#[derive(Debug, Serialize)]
pub struct CliError {
    pub error: String,
    pub message: String,
    pub exit_code: u8,
}

impl CliError {
    pub fn usage(code: &str, message: impl Into<String>) -> CliError {
        CliError {
            error: code.to_string(),
            message: message.into(),
            exit_code: EXIT_VALIDATION,
        }
    }

    pub fn compute(code: &str, message: impl Into<String>) -> CliError {
        CliError {
            error: code.to_string(),
            message: message.into(),
            exit_code: EXIT_COMPUTE,
        }
    }

    /// Compute failure named after the error's variant.
    pub fn from_compute<E: std::fmt::Debug + std::fmt::Display>(e: E) -> CliError {
        CliError::compute(&variant_name(&e), e.to_string())
    }

    /// Validation failure named after the error's variant.
    pub fn from_input<E: std::fmt::Debug + std::fmt::Display>(e: E) -> CliError {
        CliError::usage(&variant_name(&e), e.to_string())
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> CliError {
        CliError::compute("WriteFailed", format!("{}: {e}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error record serialises")
    }
}

/// Leading identifier of a `Debug` rendering, unwrapping one level of
/// transparent wrapper variants such as `Nem(EmptyComponent(2))`.
fn variant_name<E: std::fmt::Debug>(e: &E) -> String {
    let debug = format!("{e:?}");
    let head = |s: &str| -> String { s.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect() };
    let outer = head(&debug);
    let rest = &debug[outer.len()..];
    if let Some(inner) = rest.strip_prefix('(') {
        let inner = head(inner);
        if inner.chars().next().is_some_and(char::is_uppercase) {
            return inner;
        }
    }
    outer
}

#[cfg(test)]
mod tests {
    #![allow(dead_code)]

    use super::*;

    #[derive(Debug)]
    enum Inner {
        EmptyComponent(usize),
    }

    #[derive(Debug)]
    enum Outer {
        Wrapped(Inner),
        Plain { n: usize },
    }

    #[test]
    fn names_follow_variants() {
        assert_eq!(variant_name(&Outer::Wrapped(Inner::EmptyComponent(2))), "EmptyComponent");
        assert_eq!(variant_name(&Outer::Plain { n: 1 }), "Plain");
        assert_eq!(variant_name(&Inner::EmptyComponent(0)), "EmptyComponent");
    }
}
