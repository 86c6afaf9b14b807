//! The small structural type language of the built-in checker.

use std::fmt;

/// Types the built-in checker reasons about. Annotations outside this
/// language (unions, callables with signatures, user generics) degrade to
/// `Nominal` on their full canonical name or to `Any`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimpleType {
    Int,
    Float,
    Str,
    Bool,
    Bytes,
    None,
    Any,
    Callable,
    Nominal(String),
    List(Box<SimpleType>),
    Set(Box<SimpleType>),
    Dict(Box<SimpleType>, Box<SimpleType>),
    Tuple(Vec<SimpleType>),
    Optional(Box<SimpleType>),
}

impl fmt::Display for SimpleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimpleType::Int => write!(f, "int"),
            SimpleType::Float => write!(f, "float"),
            SimpleType::Str => write!(f, "str"),
            SimpleType::Bool => write!(f, "bool"),
            SimpleType::Bytes => write!(f, "bytes"),
            SimpleType::None => write!(f, "None"),
            SimpleType::Any => write!(f, "Any"),
            SimpleType::Callable => write!(f, "Callable"),
            SimpleType::Nominal(n) => write!(f, "{n}"),
            SimpleType::List(t) => write!(f, "List[{t}]"),
            SimpleType::Set(t) => write!(f, "Set[{t}]"),
            SimpleType::Dict(k, v) => write!(f, "Dict[{k},{v}]"),
            SimpleType::Tuple(ts) => {
                write!(f, "Tuple[")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, "]")
            }
            SimpleType::Optional(t) => write!(f, "Optional[{t}]"),
        }
    }
}

impl SimpleType {
    /// Normalizing constructor: `Optional[Optional[T]]` collapses to
    /// `Optional[T]` and `Optional[None]` to `None`.
    pub fn optional(inner: SimpleType) -> SimpleType {
        match inner {
            SimpleType::None => SimpleType::None,
            SimpleType::Optional(t) => SimpleType::Optional(t),
            SimpleType::Any => SimpleType::Any,
            other => SimpleType::Optional(Box::new(other)),
        }
    }

    pub fn is_any(&self) -> bool {
        matches!(self, SimpleType::Any)
    }
}

/// Parse a canonical (whitespace-free) annotation string.
///
/// Unknown heads become `Nominal` on the full text; unions other than
/// `Union[T,None]` and subscripted `Callable` degrade as documented.
pub fn parse_type(canonical: &str) -> SimpleType {
    let s = canonical.trim().trim_matches(|c| c == '"' || c == '\'');
    if s.is_empty() {
        return SimpleType::Any;
    }
    let (head, args) = split_head(s);
    let bare = head.rsplit('.').next().unwrap_or(head);
    match (bare, args) {
        ("int", None) => SimpleType::Int,
        ("float", None) => SimpleType::Float,
        ("str", None) => SimpleType::Str,
        ("bool", None) => SimpleType::Bool,
        ("bytes", None) => SimpleType::Bytes,
        ("None" | "NoneType", None) => SimpleType::None,
        ("Any" | "object", None) => SimpleType::Any,
        ("Callable", _) => SimpleType::Callable,
        ("List" | "list", None) => SimpleType::List(Box::new(SimpleType::Any)),
        ("List" | "list", Some(a)) => {
            let mut parts = split_args(a);
            SimpleType::List(Box::new(parse_type(&parts.remove(0))))
        }
        ("Set" | "set" | "FrozenSet" | "frozenset", None) => {
            SimpleType::Set(Box::new(SimpleType::Any))
        }
        ("Set" | "set" | "FrozenSet" | "frozenset", Some(a)) => {
            let mut parts = split_args(a);
            SimpleType::Set(Box::new(parse_type(&parts.remove(0))))
        }
        ("Dict" | "dict", None) => {
            SimpleType::Dict(Box::new(SimpleType::Any), Box::new(SimpleType::Any))
        }
        ("Dict" | "dict", Some(a)) => {
            let parts = split_args(a);
            if parts.len() == 2 {
                SimpleType::Dict(
                    Box::new(parse_type(&parts[0])),
                    Box::new(parse_type(&parts[1])),
                )
            } else {
                SimpleType::Dict(Box::new(SimpleType::Any), Box::new(SimpleType::Any))
            }
        }
        ("Tuple" | "tuple", None) => SimpleType::Tuple(vec![]),
        ("Tuple" | "tuple", Some(a)) => {
            let parts = split_args(a);
            if parts.len() == 1 && parts[0] == "..." {
                SimpleType::Tuple(vec![])
            } else {
                SimpleType::Tuple(
                    parts
                        .iter()
                        .filter(|p| *p != "...")
                        .map(|p| parse_type(p))
                        .collect(),
                )
            }
        }
        ("Optional", Some(a)) => {
            let mut parts = split_args(a);
            SimpleType::optional(parse_type(&parts.remove(0)))
        }
        ("Union", Some(a)) => {
            let parts = split_args(a);
            let non_none: Vec<&String> =
                parts.iter().filter(|p| *p != "None" && *p != "NoneType").collect();
            if non_none.len() == 1 && non_none.len() < parts.len() {
                SimpleType::optional(parse_type(non_none[0]))
            } else {
                // General unions are outside the type language.
                SimpleType::Any
            }
        }
        _ => SimpleType::Nominal(s.to_string()),
    }
}

fn split_head(s: &str) -> (&str, Option<&str>) {
    match s.find('[') {
        Some(i) if s.ends_with(']') => (&s[..i], Some(&s[i + 1..s.len() - 1])),
        _ => (s, None),
    }
}

/// Split bracket-balanced comma-separated type arguments.
fn split_args(s: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '[' | '(' => {
                depth += 1;
                cur.push(c);
            }
            ']' | ')' => {
                depth = depth.saturating_sub(1);
                cur.push(c);
            }
            ',' if depth == 0 => parts.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    if !cur.is_empty() {
        parts.push(cur);
    }
    parts
}

/// Can a value of type `src` flow into a slot of type `dst`?
///
/// Reflexive; `Any` both ways; `None -> Optional[T]`; `T -> Optional[T]`;
/// `int -> float`; nominal types by exact name; containers are invariant
/// with an `Any` escape hatch.
pub fn assignable(src: &SimpleType, dst: &SimpleType) -> bool {
    use SimpleType::*;
    match (src, dst) {
        (Any, _) | (_, Any) => true,
        (None, Optional(_)) => true,
        (Optional(a), Optional(b)) => invariant(a, b),
        (s, Optional(b)) => assignable(s, b),
        (Int, Float) => true,
        (Int, Int) | (Float, Float) | (Str, Str) | (Bool, Bool) | (Bytes, Bytes)
        | (None, None) | (Callable, Callable) => true,
        (Nominal(a), Nominal(b)) => a == b,
        (List(a), List(b)) | (Set(a), Set(b)) => invariant(a, b),
        (Dict(ka, va), Dict(kb, vb)) => invariant(ka, kb) && invariant(va, vb),
        (Tuple(xs), Tuple(ys)) => {
            // Unparameterized Tuple (empty vec) accepts any tuple.
            xs.is_empty()
                || ys.is_empty()
                || (xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| invariant(x, y)))
        }
        _ => false,
    }
}

fn invariant(a: &SimpleType, b: &SimpleType) -> bool {
    a.is_any() || b.is_any() || (assignable(a, b) && assignable(b, a))
}

/// Join of two inferred types: equal stays, `Any` infects, anything else
/// degrades to `Any`.
pub fn join(a: &SimpleType, b: &SimpleType) -> SimpleType {
    if a == b {
        a.clone()
    } else {
        SimpleType::Any
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use SimpleType::*;

    #[test]
    fn parse_basics() {
        assert_eq!(parse_type("int"), Int);
        assert_eq!(parse_type("List[str]"), List(Box::new(Str)));
        assert_eq!(
            parse_type("Dict[str,bool]"),
            Dict(Box::new(Str), Box::new(Bool))
        );
        assert_eq!(parse_type("Optional[str]"), Optional(Box::new(Str)));
        assert_eq!(parse_type("typing.List[int]"), List(Box::new(Int)));
        assert_eq!(parse_type("HtmlElement"), Nominal("HtmlElement".to_string()));
        assert_eq!(parse_type("Union[int,None]"), Optional(Box::new(Int)));
        assert_eq!(parse_type("Union[int,str]"), Any);
        assert_eq!(parse_type("Callable[[int],str]"), Callable);
        assert_eq!(parse_type("\"Foo\""), Nominal("Foo".to_string()));
    }

    #[test]
    fn optional_normalization() {
        assert_eq!(
            parse_type("Optional[Optional[str]]"),
            Optional(Box::new(Str))
        );
        assert_eq!(parse_type("Optional[None]"), None);
    }

    #[test]
    fn assignability_table() {
        assert!(assignable(&None, &Optional(Box::new(Str))));
        assert!(!assignable(&List(Box::new(Int)), &List(Box::new(Float))));
        assert!(assignable(&Any, &Int));
        assert!(assignable(&Int, &Any));
        assert!(assignable(&Int, &Float));
        assert!(!assignable(&Float, &Int));
        assert!(assignable(&Str, &Optional(Box::new(Str))));
        assert!(!assignable(&Int, &Optional(Box::new(Str))));
        assert!(assignable(&List(Box::new(Str)), &List(Box::new(Any))));
        assert!(assignable(&List(Box::new(Any)), &List(Box::new(Str))));
        assert!(!assignable(&Str, &None));
        assert!(!assignable(&Bool, &Str));
        assert!(!assignable(&Bool, &Optional(Box::new(Str))));
        assert!(assignable(
            &Nominal("Foo".into()),
            &Nominal("Foo".into())
        ));
        assert!(!assignable(&Nominal("Foo".into()), &Nominal("Bar".into())));
    }

    #[test]
    fn display_round_trips_canonical() {
        for s in ["int", "List[str]", "Dict[str,int]", "Optional[str]", "Tuple[int,str]"] {
            assert_eq!(parse_type(s).to_string(), s);
        }
    }
}
