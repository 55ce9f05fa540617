//! CNF formulas with clause width at most three: model, DIMACS I/O,
//! evaluation and a brute-force satisfiability oracle.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

/// Largest variable count [`brute_force_sat`] accepts by default.
pub const DEFAULT_BRUTE_FORCE_CAP: u32 = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("malformed DIMACS header: {0}")]
    MalformedHeader(String),
    #[error("clause {clause} has {len} literals, at most 3 are allowed")]
    ClauseTooLarge { clause: usize, len: usize },
    #[error("clause {0} is empty")]
    EmptyClause(usize),
    #[error("variable {var} is outside 1..={num_vars}")]
    VarOutOfRange { var: u32, num_vars: u32 },
    #[error("header declares {declared} clauses but {actual} were found")]
    CountMismatch { declared: usize, actual: usize },
    #[error("formula has no clauses")]
    EmptyFormula,
    #[error("formula has no variables")]
    NoVariables,
    #[error("bad literal token {0:?}")]
    BadLiteral(String),
    #[error("last clause is not terminated by 0")]
    UnterminatedClause,
    #[error("assignment covers {given} variables, formula has {needed}")]
    PartialAssignment { given: usize, needed: u32 },
    #[error("brute force limited to {cap} variables, formula has {num_vars}")]
    TooManyVariables { num_vars: u32, cap: u32 },
    #[error("bad assignment string: {0}")]
    BadAssignment(String),
}

/// A signed occurrence of a variable. Variables are numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub var: u32,
    pub positive: bool,
}

impl Literal {
    pub fn new(var: u32, positive: bool) -> Self {
        assert!(var >= 1, "variables are numbered from 1");
        Literal { var, positive }
    }

    pub fn pos(var: u32) -> Self {
        Literal::new(var, true)
    }

    pub fn neg(var: u32) -> Self {
        Literal::new(var, false)
    }

    /// Parses a nonzero DIMACS integer.
    pub fn from_dimacs(value: i64) -> Option<Self> {
        if value == 0 || value.unsigned_abs() > u32::MAX as u64 {
            return None;
        }
        Some(Literal::new(value.unsigned_abs() as u32, value > 0))
    }

    pub fn to_dimacs(self) -> i64 {
        if self.positive {
            self.var as i64
        } else {
            -(self.var as i64)
        }
    }

    pub fn negated(self) -> Self {
        Literal { var: self.var, positive: !self.positive }
    }

    /// Truth value under `a`; panics if `a` does not cover the variable.
    pub fn holds(self, a: &Assignment) -> bool {
        a.value(self.var) == self.positive
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// Ordered literal slots; the order fixes the door order of the clause gadget.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    pub fn new(literals: Vec<Literal>) -> Result<Self, FormulaError> {
        Self::checked(literals, 0)
    }

    fn checked(literals: Vec<Literal>, index: usize) -> Result<Self, FormulaError> {
        match literals.len() {
            0 => Err(FormulaError::EmptyClause(index)),
            1..=3 => Ok(Clause { literals }),
            len => Err(FormulaError::ClauseTooLarge { clause: index, len }),
        }
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn satisfied_by(&self, a: &Assignment) -> bool {
        self.literals.iter().any(|l| l.holds(a))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Formula {
    num_vars: u32,
    clauses: Vec<Clause>,
}

impl Formula {
    pub fn new(num_vars: u32, clauses: Vec<Clause>) -> Result<Self, FormulaError> {
        if num_vars == 0 {
            return Err(FormulaError::NoVariables);
        }
        if clauses.is_empty() {
            return Err(FormulaError::EmptyFormula);
        }
        for lit in clauses.iter().flat_map(|c| c.literals()) {
            if lit.var > num_vars {
                return Err(FormulaError::VarOutOfRange { var: lit.var, num_vars });
            }
        }
        Ok(Formula { num_vars, clauses })
    }

    /// Builds a formula from DIMACS-style integer clauses, sizing the
    /// variable range to the largest variable used.
    pub fn from_ints(clauses: &[&[i64]]) -> Result<Self, FormulaError> {
        let mut parsed = Vec::with_capacity(clauses.len());
        for (j, ints) in clauses.iter().enumerate() {
            let lits = ints
                .iter()
                .map(|&v| Literal::from_dimacs(v).ok_or_else(|| FormulaError::BadLiteral(v.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            parsed.push(Clause::checked(lits, j)?);
        }
        let num_vars = parsed.iter().flat_map(|c| c.literals()).map(|l| l.var).max().unwrap_or(0);
        Formula::new(num_vars, parsed)
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// Total number of literal occurrences.
    pub fn num_literals(&self) -> usize {
        self.clauses.iter().map(Clause::len).sum()
    }

    /// Variables that occur in some clause, ordered by first occurrence.
    pub fn occurring_vars(&self) -> Vec<u32> {
        let mut seen = vec![false; self.num_vars as usize + 1];
        let mut order = Vec::new();
        for lit in self.clauses.iter().flat_map(|c| c.literals()) {
            if !seen[lit.var as usize] {
                seen[lit.var as usize] = true;
                order.push(lit.var);
            }
        }
        order
    }

    pub fn eval(&self, a: &Assignment) -> Result<bool, FormulaError> {
        if a.num_vars() < self.num_vars as usize {
            return Err(FormulaError::PartialAssignment { given: a.num_vars(), needed: self.num_vars });
        }
        Ok(self.clauses.iter().all(|c| c.satisfied_by(a)))
    }

    /// DIMACS text: header, then one 0-terminated clause per line.
    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for clause in &self.clauses {
            for lit in clause.literals() {
                out.push_str(&lit.to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, clause) in self.clauses.iter().enumerate() {
            if j > 0 {
                write!(f, " & ")?;
            }
            write!(f, "(")?;
            for (m, lit) in clause.literals().iter().enumerate() {
                if m > 0 {
                    write!(f, " | ")?;
                }
                if !lit.positive {
                    write!(f, "~")?;
                }
                write!(f, "x{}", lit.var)?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl FromStr for Formula {
    type Err = FormulaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_dimacs(s)
    }
}

pub fn parse_dimacs(text: &str) -> Result<Formula, FormulaError> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses = Vec::new();
    let mut current = Vec::new();

    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        // SATLIB files end with a `%` marker line.
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(FormulaError::MalformedHeader("duplicate header".into()));
            }
            header = Some(parse_header(line)?);
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(FormulaError::MalformedHeader("clause before header".into()));
        };
        for token in line.split_whitespace() {
            let value: i64 = token.parse().map_err(|_| FormulaError::BadLiteral(token.to_string()))?;
            if value == 0 {
                let lits = std::mem::take(&mut current);
                clauses.push(Clause::checked(lits, clauses.len())?);
                continue;
            }
            let lit = Literal::from_dimacs(value).ok_or_else(|| FormulaError::BadLiteral(token.to_string()))?;
            if lit.var > num_vars {
                return Err(FormulaError::VarOutOfRange { var: lit.var, num_vars });
            }
            current.push(lit);
            if current.len() > 3 {
                return Err(FormulaError::ClauseTooLarge { clause: clauses.len(), len: current.len() });
            }
        }
    }

    // clauses before a header are rejected above, so no header means no content
    let (num_vars, declared) = header.ok_or(FormulaError::EmptyFormula)?;
    if !current.is_empty() {
        return Err(FormulaError::UnterminatedClause);
    }
    if declared != clauses.len() {
        return Err(FormulaError::CountMismatch { declared, actual: clauses.len() });
    }
    if clauses.is_empty() {
        return Err(FormulaError::EmptyFormula);
    }
    Formula::new(num_vars, clauses)
}

fn parse_header(line: &str) -> Result<(u32, usize), FormulaError> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
        return Err(FormulaError::MalformedHeader(line.to_string()));
    }
    let n = parts[2].parse().map_err(|_| FormulaError::MalformedHeader(line.to_string()))?;
    let m = parts[3].parse().map_err(|_| FormulaError::MalformedHeader(line.to_string()))?;
    Ok((n, m))
}

/// Total truth assignment over variables `1..=num_vars`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    values: Vec<bool>,
}

impl Assignment {
    /// `values[i]` is the value of variable `i + 1`.
    pub fn from_values(values: Vec<bool>) -> Self {
        Assignment { values }
    }

    pub fn all(num_vars: u32, value: bool) -> Self {
        Assignment { values: vec![value; num_vars as usize] }
    }

    pub fn num_vars(&self) -> usize {
        self.values.len()
    }

    pub fn value(&self, var: u32) -> bool {
        self.values[var as usize - 1]
    }

    pub fn set(&mut self, var: u32, value: bool) {
        self.values[var as usize - 1] = value;
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    /// Parses `1=1,2=0,...`; every variable in `1..=num_vars` must be given.
    pub fn parse(text: &str, num_vars: u32) -> Result<Self, FormulaError> {
        let mut values: Vec<Option<bool>> = vec![None; num_vars as usize];
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (var, val) = item
                .split_once('=')
                .ok_or_else(|| FormulaError::BadAssignment(item.to_string()))?;
            let var: u32 = var
                .trim()
                .trim_start_matches('x')
                .parse()
                .map_err(|_| FormulaError::BadAssignment(item.to_string()))?;
            if var == 0 || var > num_vars {
                return Err(FormulaError::VarOutOfRange { var, num_vars });
            }
            let val = match val.trim() {
                "1" | "T" | "t" | "true" => true,
                "0" | "F" | "f" | "false" => false,
                _ => return Err(FormulaError::BadAssignment(item.to_string())),
            };
            values[var as usize - 1] = Some(val);
        }
        let given = values.iter().filter(|v| v.is_some()).count();
        if given < num_vars as usize {
            return Err(FormulaError::PartialAssignment { given, needed: num_vars });
        }
        Ok(Assignment { values: values.into_iter().map(Option::unwrap).collect() })
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}={}", i + 1, u8::from(*v))?;
        }
        Ok(())
    }
}

pub fn brute_force_sat(f: &Formula) -> Result<Option<Assignment>, FormulaError> {
    brute_force_sat_capped(f, DEFAULT_BRUTE_FORCE_CAP)
}

/// Lexicographically first satisfying assignment (variable 1 most
/// significant, false before true).
pub fn brute_force_sat_capped(f: &Formula, cap: u32) -> Result<Option<Assignment>, FormulaError> {
    let n = f.num_vars();
    if n > cap || n >= 64 {
        return Err(FormulaError::TooManyVariables { num_vars: n, cap });
    }
    let mut a = Assignment::all(n, false);
    for code in 0u64..(1u64 << n) {
        for var in 1..=n {
            a.set(var, (code >> (n - var)) & 1 == 1);
        }
        if f.eval(&a)? {
            return Ok(Some(a));
        }
    }
    Ok(None)
}

/// Generators for the formula families used by sweeps and tests.
pub mod gen {
    use super::*;

    /// All clauses of `width` literals over `num_vars` variables, as sorted
    /// multisets.
    pub fn clauses_of_width(num_vars: u32, width: usize) -> Vec<Clause> {
        let lits: Vec<Literal> = (1..=num_vars).flat_map(|v| [Literal::pos(v), Literal::neg(v)]).collect();
        multisets(lits.len(), width)
            .into_iter()
            .map(|idx| Clause { literals: idx.into_iter().map(|i| lits[i]).collect() })
            .collect()
    }

    pub fn width3_clauses(num_vars: u32) -> Vec<Clause> {
        clauses_of_width(num_vars, 3)
    }

    /// Nondecreasing index tuples of length `k` over `0..len`.
    fn multisets(len: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        if len == 0 {
            return out;
        }
        let mut idx = vec![0usize; k];
        loop {
            out.push(idx.clone());
            let mut j = k;
            while j > 0 && idx[j - 1] == len - 1 {
                j -= 1;
            }
            if j == 0 {
                return out;
            }
            idx[j - 1] += 1;
            let v = idx[j - 1];
            for slot in idx.iter_mut().skip(j) {
                *slot = v;
            }
        }
    }

    fn formulas_over(n: u32, pool: &[Clause], max_clauses: usize, out: &mut Vec<Formula>) {
        for m in 1..=max_clauses {
            for idx in multisets(pool.len(), m) {
                let clauses: Vec<Clause> = idx.iter().map(|&i| pool[i].clone()).collect();
                let f = Formula { num_vars: n, clauses };
                if f.occurring_vars().len() == n as usize {
                    out.push(f);
                }
            }
        }
    }

    /// Every formula whose clauses are width-3 sorted multisets, whose clause
    /// list is a sorted multiset of 1..=max_clauses clauses, and which uses
    /// every one of its `num_vars` variables. Ordered by (N, M, clause indices).
    pub fn canonical_3cnf(max_vars: u32, max_clauses: usize) -> Vec<Formula> {
        let mut out = Vec::new();
        for n in 1..=max_vars {
            formulas_over(n, &width3_clauses(n), max_clauses, &mut out);
        }
        out
    }

    /// Like [`canonical_3cnf`] but with clause widths 1 to 3.
    pub fn all_small_formulas(max_vars: u32, max_clauses: usize) -> Vec<Formula> {
        let mut out = Vec::new();
        for n in 1..=max_vars {
            let pool: Vec<Clause> = (1..=3).flat_map(|w| clauses_of_width(n, w)).collect();
            formulas_over(n, &pool, max_clauses, &mut out);
        }
        out
    }

    /// Random formula with `num_vars` variables, `num_clauses` clauses and
    /// clause widths drawn uniformly from `1..=3` (or fixed to 3).
    pub fn random_formula<R: Rng>(rng: &mut R, num_vars: u32, num_clauses: usize, width3_only: bool) -> Formula {
        let clauses = (0..num_clauses)
            .map(|_| {
                let width = if width3_only { 3 } else { rng.gen_range(1..=3) };
                let literals = (0..width)
                    .map(|_| Literal::new(rng.gen_range(1..=num_vars), rng.gen_bool(0.5)))
                    .collect();
                Clause { literals }
            })
            .collect();
        Formula { num_vars, clauses }
    }

    /// The formula of the running example: (~x|~y|z)(x|~y|z)(x|y|~z).
    pub fn figure_formula() -> Formula {
        Formula::from_ints(&[&[-1, -2, 3], &[1, -2, 3], &[1, 2, -3]]).expect("valid")
    }

    /// (x|x|x)(~x|~x|~x), the smallest unsatisfiable width-3 pair.
    pub fn unsat_pair() -> Formula {
        Formula::from_ints(&[&[1, 1, 1], &[-1, -1, -1]]).expect("valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_figure_formula() {
        let f = parse_dimacs("p cnf 3 3\n-1 -2 3 0\n1 -2 3 0\n1 2 -3 0\n").unwrap();
        assert_eq!(f.num_vars(), 3);
        assert_eq!(f.num_clauses(), 3);
        assert_eq!(f, gen::figure_formula());
        assert_eq!(f.clauses()[0].literals(), &[Literal::neg(1), Literal::neg(2), Literal::pos(3)]);
    }

    #[test]
    fn parses_smallest_input_and_comments() {
        let f = parse_dimacs("c hello\np cnf 1 1\n1 0\n").unwrap();
        assert_eq!(f.num_clauses(), 1);
        assert_eq!(f.clauses()[0].literals(), &[Literal::pos(1)]);
        // clauses may span lines
        let g = parse_dimacs("p cnf 2 1\n1\n-2 0\n%\n0\n").unwrap();
        assert_eq!(g.clauses()[0].len(), 2);
    }

    #[test]
    fn parse_errors() {
        use FormulaError::*;
        assert!(matches!(parse_dimacs("p cnf 1 1\n1 1 1 1 0\n"), Err(ClauseTooLarge { len: 4, .. })));
        assert!(matches!(parse_dimacs("p dnf 1 1\n1 0\n"), Err(MalformedHeader(_))));
        assert!(matches!(parse_dimacs("1 0\n"), Err(MalformedHeader(_))));
        assert!(matches!(parse_dimacs("p cnf 1 2\n1 0\n0\n"), Err(EmptyClause(1))));
        assert!(matches!(parse_dimacs("p cnf 1 1\n2 0\n"), Err(VarOutOfRange { var: 2, num_vars: 1 })));
        assert!(matches!(parse_dimacs("p cnf 1 2\n1 0\n"), Err(CountMismatch { declared: 2, actual: 1 })));
        assert!(matches!(parse_dimacs("p cnf 1 0\n"), Err(EmptyFormula)));
        assert!(matches!(parse_dimacs(""), Err(EmptyFormula)));
        assert!(matches!(parse_dimacs("c only a comment\n"), Err(EmptyFormula)));
        assert!(matches!(parse_dimacs("p cnf 1 1\n1 x 0\n"), Err(BadLiteral(_))));
        assert!(matches!(parse_dimacs("p cnf 1 1\n1\n"), Err(UnterminatedClause)));
    }

    #[test]
    fn eval_examples() {
        let f = gen::figure_formula();
        let a = Assignment::from_values(vec![true, false, true]);
        assert!(f.eval(&a).unwrap());

        let pair = gen::unsat_pair();
        assert!(!pair.eval(&Assignment::from_values(vec![true])).unwrap());

        let taut = Formula::from_ints(&[&[1, -1, 2]]).unwrap();
        for code in 0..4 {
            let a = Assignment::from_values(vec![code & 1 == 1, code & 2 == 2]);
            assert!(taut.eval(&a).unwrap());
        }

        assert!(matches!(f.eval(&Assignment::all(2, true)), Err(FormulaError::PartialAssignment { .. })));
    }

    #[test]
    fn brute_force_examples() {
        // all 8 assignments of the figure formula, enumerated independently
        let f = gen::figure_formula();
        let mut first = None;
        for code in 0..8u32 {
            let vals = vec![code & 4 != 0, code & 2 != 0, code & 1 != 0];
            let a = Assignment::from_values(vals);
            if f.eval(&a).unwrap() && first.is_none() {
                first = Some(a);
            }
        }
        let found = brute_force_sat(&f).unwrap().unwrap();
        assert!(f.eval(&found).unwrap());
        assert_eq!(Some(found), first);

        assert_eq!(brute_force_sat(&gen::unsat_pair()).unwrap(), None);

        let unit = parse_dimacs("p cnf 1 1\n1 0\n").unwrap();
        assert_eq!(brute_force_sat(&unit).unwrap(), Some(Assignment::from_values(vec![true])));

        let wide = Formula::new(30, vec![Clause::new(vec![Literal::pos(30)]).unwrap()]).unwrap();
        assert!(matches!(brute_force_sat(&wide), Err(FormulaError::TooManyVariables { .. })));
    }

    #[test]
    fn assignment_strings() {
        let a = Assignment::parse("1=1,2=0,3=1", 3).unwrap();
        assert_eq!(a.values(), &[true, false, true]);
        assert_eq!(a.to_string(), "1=1,2=0,3=1");
        assert!(matches!(Assignment::parse("1=1,3=1", 3), Err(FormulaError::PartialAssignment { .. })));
        assert!(matches!(Assignment::parse("4=1", 3), Err(FormulaError::VarOutOfRange { .. })));
        assert!(matches!(Assignment::parse("1=2", 1), Err(FormulaError::BadAssignment(_))));
    }

    #[test]
    fn canonical_enumeration_counts() {
        // N=1: 4 width-3 clauses; M<=2 multisets: 4 + 10
        assert_eq!(gen::canonical_3cnf(1, 2).len(), 14);
        // N=2: 20 clauses, of which 4 use only x1 and 4 only x2.
        let n2: Vec<_> = gen::canonical_3cnf(2, 1).into_iter().filter(|f| f.num_vars() == 2).collect();
        assert_eq!(n2.len(), 12);
        // widths 1..3: 9 clauses over x1, 34 over x1,x2.
        // N=1: 9 + 45; N=2: (34 - 18) + (595 - 45 - 45)
        assert_eq!(gen::all_small_formulas(1, 2).len(), 54);
        assert_eq!(gen::all_small_formulas(2, 2).len(), 54 + 16 + 505);
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        (1u32..=5).prop_flat_map(|n| {
            let lit = (1..=n, any::<bool>()).prop_map(|(v, p)| Literal::new(v, p));
            let clause = prop::collection::vec(lit, 1..=3).prop_map(|l| Clause::new(l).unwrap());
            prop::collection::vec(clause, 1..=6).prop_map(move |c| Formula::new(n, c).unwrap())
        })
    }

    proptest! {
        #[test]
        fn serialize_parse_identity(f in arb_formula()) {
            prop_assert_eq!(parse_dimacs(&f.to_dimacs()).unwrap(), f);
        }

        #[test]
        fn brute_force_matches_enumeration(f in arb_formula()) {
            let n = f.num_vars();
            let exists = (0..1u32 << n).any(|code| {
                let a = Assignment::from_values((0..n).map(|i| code >> i & 1 == 1).collect());
                f.eval(&a).unwrap()
            });
            let found = brute_force_sat(&f).unwrap();
            prop_assert_eq!(found.is_some(), exists);
            if let Some(a) = found {
                prop_assert!(f.eval(&a).unwrap());
            }
        }

        #[test]
        fn eval_monotone_under_clause_removal(f in arb_formula(), mask in any::<u8>(), code in any::<u32>()) {
            let n = f.num_vars();
            let a = Assignment::from_values((0..n).map(|i| code >> i & 1 == 1).collect());
            let kept: Vec<Clause> = f.clauses().iter().enumerate()
                .filter(|(j, _)| mask >> (j % 8) & 1 == 1).map(|(_, c)| c.clone()).collect();
            if f.eval(&a).unwrap() && !kept.is_empty() {
                let sub = Formula::new(n, kept).unwrap();
                prop_assert!(sub.eval(&a).unwrap());
            }
        }
    }
}
