//! Scope-aware extraction of tables, columns and join pairs from a SELECT.
//!
//! Column references are resolved through table aliases, derived tables,
//! CTEs and correlated subqueries down to concrete catalog columns.
//! Unqualified columns resolve against the tables in scope; a name owned by
//! more than one in-scope table is an ambiguity error. Join pairs are
//! equalities between columns of two distinct tables found in `ON`
//! conditions, `USING` lists, and top-level `WHERE` conjuncts.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use sqlparser::ast::{
    BinaryOperator, Expr, GroupByExpr, Ident, JoinConstraint, JoinOperator, ObjectName, ObjectNamePart, OrderByKind,
    Query, Select, SelectItem, SelectItemQualifiedWildcardKind, SetExpr, Statement, TableFactor, TableWithJoins, Visit,
    Visitor,
};
use sqlparser::dialect::GenericDialect;
use sqlparser::parser::{Parser, ParserError};
use thiserror::Error;

use crate::catalog::{Catalog, ColumnRef};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SqlError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("ambiguous column `{column}`: candidates {}", candidates.join(", "))]
    Ambiguous { column: String, candidates: Vec<String> },
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("unsupported statement: {0}")]
    Unsupported(String),
}

/// Functions outside the portable subset the evaluation engine runs. They
/// are accepted during analysis and reported in
/// [`SqlAnalysis::non_executable`].
const DIALECT_ONLY_FUNCTIONS: &[&str] = &[
    "APPROX_COUNT_DISTINCT",
    "ARRAY_AGG",
    "COUNTIF",
    "DATE_DIFF",
    "DATE_TRUNC",
    "FORMAT_DATE",
    "GENERATE_DATE_ARRAY",
    "PARSE_DATE",
    "SAFE_CAST",
    "SAFE_DIVIDE",
    "TIMESTAMP_TRUNC",
];

/// Bare identifiers that name niladic functions rather than columns.
const NILADIC: &[&str] = &["CURRENT_DATE", "CURRENT_TIME", "CURRENT_TIMESTAMP", "TRUE", "FALSE"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinPair {
    pub left: ColumnRef,
    pub right: ColumnRef,
}

impl JoinPair {
    fn same_as(&self, other: &JoinPair) -> bool {
        (self.left == other.left && self.right == other.right) || (self.left == other.right && self.right == other.left)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlAnalysis {
    /// Referenced catalog tables, alphabetical.
    pub tables: Vec<String>,
    /// Referenced catalog columns, alphabetical by (table, column).
    pub columns: Vec<ColumnRef>,
    /// Equi-join column pairs in order of appearance.
    pub join_pairs: Vec<JoinPair>,
    pub normalized_sql: String,
    /// Dialect-only functions found; empty when the query is portable.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub non_executable: Vec<String>,
}

impl SqlAnalysis {
    pub fn is_executable(&self) -> bool {
        self.non_executable.is_empty()
    }
}

fn syntax_error(sql: &str, err: ParserError) -> SqlError {
    let message = match err {
        ParserError::TokenizerError(m) | ParserError::ParserError(m) => m,
        ParserError::RecursionLimitExceeded => "recursion limit exceeded".to_string(),
    };
    let number_after = |label: &str| {
        message.rfind(label).and_then(|i| {
            message[i + label.len()..]
                .chars()
                .take_while(|c| c.is_ascii_digit())
                .collect::<String>()
                .parse()
                .ok()
        })
    };
    // errors at end of input carry no location; point just past the text
    let end_line = sql.lines().count().max(1);
    let end_column = sql.lines().last().map_or(0, |l| l.chars().count()) + 1;
    SqlError::Syntax {
        line: number_after("Line: ").unwrap_or(end_line),
        column: number_after("Column: ").unwrap_or(end_column),
        message,
    }
}

/// Parses exactly one statement (a trailing semicolon is allowed).
pub fn parse_statement(sql: &str) -> Result<Statement, SqlError> {
    let mut statements = Parser::parse_sql(&GenericDialect {}, sql).map_err(|e| syntax_error(sql, e))?;
    match statements.len() {
        1 => Ok(statements.remove(0)),
        0 => Err(SqlError::Syntax {
            line: 1,
            column: 1,
            message: "empty statement".into(),
        }),
        n => Err(SqlError::Unsupported(format!("expected one statement, found {n}"))),
    }
}

pub fn parse_query(sql: &str) -> Result<Box<Query>, SqlError> {
    match parse_statement(sql)? {
        Statement::Query(q) => Ok(q),
        other => Err(SqlError::Unsupported(
            other.to_string().split_whitespace().next().unwrap_or("").to_string(),
        )),
    }
}

/// Whether the outermost query carries an ORDER BY clause.
pub fn has_outer_order_by(sql: &str) -> Result<bool, SqlError> {
    Ok(parse_query(sql)?.order_by.is_some())
}

/// Canonical single-line rendering of a query.
pub fn normalize(sql: &str) -> Result<String, SqlError> {
    Ok(parse_statement(sql)?.to_string())
}

pub fn analyze_sql(sql: &str, catalog: &Catalog) -> Result<SqlAnalysis, SqlError> {
    let query = parse_query(sql)?;
    let mut analyzer = Analyzer {
        catalog,
        tables: BTreeSet::new(),
        columns: BTreeSet::new(),
        joins: Vec::new(),
        dialect_only: BTreeSet::new(),
    };
    analyzer.query(&query, &Ctes::default(), None)?;
    Ok(SqlAnalysis {
        tables: analyzer.tables.into_iter().collect(),
        columns: analyzer.columns.into_iter().collect(),
        join_pairs: analyzer.joins,
        normalized_sql: query.to_string(),
        non_executable: analyzer.dialect_only.into_iter().collect(),
    })
}

#[derive(Debug, Clone)]
struct OutputColumn {
    name: String,
    origin: Option<ColumnRef>,
}

type Ctes = BTreeMap<String, Vec<OutputColumn>>;

#[derive(Debug)]
enum SourceKind {
    Table(String),
    Derived(Vec<OutputColumn>),
    Opaque,
}

#[derive(Debug)]
struct Source {
    binding: Option<String>,
    kind: SourceKind,
}

struct Scope<'p> {
    sources: Vec<Source>,
    aliases: BTreeSet<String>,
    parent: Option<&'p Scope<'p>>,
}

enum Lookup {
    Found(Option<ColumnRef>),
    Missing,
}

fn key(name: &str) -> String {
    name.to_ascii_lowercase()
}

fn object_parts(name: &ObjectName) -> Vec<String> {
    name.0
        .iter()
        .map(|part| match part {
            ObjectNamePart::Identifier(id) => id.value.clone(),
            other => other.to_string(),
        })
        .collect()
}

fn column_idents(expr: &Expr) -> Option<Vec<&Ident>> {
    match expr {
        Expr::Identifier(id) => Some(vec![id]),
        Expr::CompoundIdentifier(ids) => Some(ids.iter().collect()),
        Expr::Nested(inner) => column_idents(inner),
        _ => None,
    }
}

struct Analyzer<'c> {
    catalog: &'c Catalog,
    tables: BTreeSet<String>,
    columns: BTreeSet<ColumnRef>,
    joins: Vec<JoinPair>,
    dialect_only: BTreeSet<String>,
}

impl<'c> Analyzer<'c> {
    fn query(&mut self, query: &Query, ctes: &Ctes, parent: Option<&Scope<'_>>) -> Result<Vec<OutputColumn>, SqlError> {
        let mut local = ctes.clone();
        if let Some(with) = &query.with {
            for cte in &with.cte_tables {
                let mut outputs = self.query(&cte.query, &local, None)?;
                for (out, renamed) in outputs.iter_mut().zip(&cte.alias.columns) {
                    out.name = renamed.name.value.clone();
                }
                local.insert(key(&cte.alias.name.value), outputs);
            }
        }
        let (outputs, scope) = self.set_expr(&query.body, &local, parent)?;
        if let Some(order_by) = &query.order_by {
            if let (OrderByKind::Expressions(exprs), Some(scope)) = (&order_by.kind, &scope) {
                for item in exprs {
                    self.walk(&item.expr, scope, &local)?;
                }
            }
        }
        Ok(outputs)
    }

    fn set_expr<'p>(
        &mut self,
        body: &SetExpr,
        ctes: &Ctes,
        parent: Option<&'p Scope<'p>>,
    ) -> Result<(Vec<OutputColumn>, Option<Scope<'p>>), SqlError> {
        match body {
            SetExpr::Select(select) => {
                let (outputs, scope) = self.select(select, ctes, parent)?;
                Ok((outputs, Some(scope)))
            }
            SetExpr::Query(q) => Ok((self.query(q, ctes, parent)?, None)),
            SetExpr::SetOperation { left, right, .. } => {
                let (outputs, _) = self.set_expr(left, ctes, parent)?;
                self.set_expr(right, ctes, parent)?;
                Ok((outputs, None))
            }
            SetExpr::Values(_) => Ok((Vec::new(), None)),
            other => Err(SqlError::Unsupported(other.to_string())),
        }
    }

    fn select<'p>(
        &mut self,
        select: &Select,
        ctes: &Ctes,
        parent: Option<&'p Scope<'p>>,
    ) -> Result<(Vec<OutputColumn>, Scope<'p>), SqlError> {
        let mut scope = Scope {
            sources: Vec::new(),
            aliases: BTreeSet::new(),
            parent,
        };
        for twj in &select.from {
            self.register(twj, ctes, &mut scope)?;
        }
        for item in &select.projection {
            if let SelectItem::ExprWithAlias { alias, .. } = item {
                scope.aliases.insert(key(&alias.value));
            }
        }

        let mut outputs = Vec::new();
        for item in &select.projection {
            match item {
                SelectItem::UnnamedExpr(expr) => {
                    self.walk(expr, &scope, ctes)?;
                    let origin = self.origin_of(expr, &scope)?;
                    let name = match column_idents(expr) {
                        Some(ids) => ids.last().map(|i| i.value.clone()).unwrap_or_default(),
                        None => expr.to_string(),
                    };
                    outputs.push(OutputColumn { name, origin });
                }
                SelectItem::ExprWithAlias { expr, alias } => {
                    self.walk(expr, &scope, ctes)?;
                    let origin = self.origin_of(expr, &scope)?;
                    outputs.push(OutputColumn {
                        name: alias.value.clone(),
                        origin,
                    });
                }
                SelectItem::ExprWithAliases { expr, aliases } => {
                    self.walk(expr, &scope, ctes)?;
                    for alias in aliases {
                        outputs.push(OutputColumn {
                            name: alias.value.clone(),
                            origin: None,
                        });
                    }
                }
                SelectItem::Wildcard(_) => {
                    for source in &scope.sources {
                        outputs.extend(self.source_columns(source));
                    }
                }
                SelectItem::QualifiedWildcard(kind, _) => {
                    let qualifier = match kind {
                        SelectItemQualifiedWildcardKind::ObjectName(name) => {
                            object_parts(name).pop().unwrap_or_default()
                        }
                        SelectItemQualifiedWildcardKind::Expr(expr) => expr.to_string(),
                    };
                    let source = scope
                        .sources
                        .iter()
                        .find(|s| s.binding.as_deref().map(key) == Some(key(&qualifier)))
                        .ok_or_else(|| SqlError::UnknownTable(qualifier.clone()))?;
                    outputs.extend(self.source_columns(source));
                }
            }
        }

        let mut offset = 0;
        for twj in &select.from {
            offset = self.join_constraints(twj, &scope, ctes, offset)?;
        }
        if let Some(selection) = &select.selection {
            self.walk(selection, &scope, ctes)?;
            self.detect_joins(selection, &scope)?;
        }
        if let GroupByExpr::Expressions(exprs, _) = &select.group_by {
            for expr in exprs {
                self.walk(expr, &scope, ctes)?;
            }
        }
        for expr in select.having.iter().chain(select.qualify.iter()) {
            self.walk(expr, &scope, ctes)?;
        }
        Ok((outputs, scope))
    }

    fn source_columns(&self, source: &Source) -> Vec<OutputColumn> {
        match &source.kind {
            SourceKind::Table(name) => self
                .catalog
                .table(name)
                .map(|t| {
                    t.columns
                        .iter()
                        .map(|c| OutputColumn {
                            name: c.name.clone(),
                            origin: Some(ColumnRef::new(&t.name, &c.name)),
                        })
                        .collect()
                })
                .unwrap_or_default(),
            SourceKind::Derived(cols) => cols.clone(),
            SourceKind::Opaque => Vec::new(),
        }
    }

    fn register(&mut self, twj: &TableWithJoins, ctes: &Ctes, scope: &mut Scope<'_>) -> Result<(), SqlError> {
        self.register_factor(&twj.relation, ctes, scope)?;
        for join in &twj.joins {
            self.register_factor(&join.relation, ctes, scope)?;
        }
        Ok(())
    }

    fn register_factor(&mut self, factor: &TableFactor, ctes: &Ctes, scope: &mut Scope<'_>) -> Result<(), SqlError> {
        match factor {
            TableFactor::Table { name, alias, .. } => {
                let parts = object_parts(name);
                let last = parts.last().cloned().unwrap_or_default();
                let binding = alias
                    .as_ref()
                    .map(|a| a.name.value.clone())
                    .unwrap_or_else(|| last.clone());
                let kind = if parts.len() == 1 && ctes.contains_key(&key(&last)) {
                    SourceKind::Derived(ctes[&key(&last)].clone())
                } else {
                    let table = self
                        .catalog
                        .tables()
                        .iter()
                        .find(|t| key(&t.name) == key(&last))
                        .ok_or_else(|| SqlError::UnknownTable(parts.join(".")))?;
                    self.tables.insert(table.name.clone());
                    SourceKind::Table(table.name.clone())
                };
                scope.sources.push(Source {
                    binding: Some(binding),
                    kind,
                });
            }
            TableFactor::Derived { subquery, alias, .. } => {
                let mut outputs = self.query(subquery, ctes, None)?;
                if let Some(alias) = alias {
                    for (out, renamed) in outputs.iter_mut().zip(&alias.columns) {
                        out.name = renamed.name.value.clone();
                    }
                }
                scope.sources.push(Source {
                    binding: alias.as_ref().map(|a| a.name.value.clone()),
                    kind: SourceKind::Derived(outputs),
                });
            }
            TableFactor::NestedJoin { table_with_joins, .. } => self.register(table_with_joins, ctes, scope)?,
            other => {
                scope.sources.push(Source {
                    binding: None,
                    kind: SourceKind::Opaque,
                });
                self.dialect_only.insert(
                    other
                        .to_string()
                        .split(['(', ' '])
                        .next()
                        .unwrap_or("")
                        .to_ascii_uppercase(),
                );
            }
        }
        Ok(())
    }

    /// Walks join constraints in the same order sources were registered.
    /// `offset` is the index of `twj.relation` within `scope.sources`.
    fn join_constraints(
        &mut self,
        twj: &TableWithJoins,
        scope: &Scope<'_>,
        ctes: &Ctes,
        offset: usize,
    ) -> Result<usize, SqlError> {
        let mut next = self.factor_constraints(&twj.relation, scope, ctes, offset)?;
        for join in &twj.joins {
            let right_index = next;
            next = self.factor_constraints(&join.relation, scope, ctes, next)?;
            let constraint = match &join.join_operator {
                JoinOperator::Join(c)
                | JoinOperator::Inner(c)
                | JoinOperator::Left(c)
                | JoinOperator::LeftOuter(c)
                | JoinOperator::Right(c)
                | JoinOperator::RightOuter(c)
                | JoinOperator::FullOuter(c)
                | JoinOperator::CrossJoin(c)
                | JoinOperator::Semi(c)
                | JoinOperator::LeftSemi(c)
                | JoinOperator::RightSemi(c)
                | JoinOperator::Anti(c)
                | JoinOperator::LeftAnti(c)
                | JoinOperator::RightAnti(c)
                | JoinOperator::StraightJoin(c) => Some(c),
                JoinOperator::AsOf { constraint, .. } => Some(constraint),
                _ => None,
            };
            match constraint {
                Some(JoinConstraint::On(expr)) => {
                    self.walk(expr, scope, ctes)?;
                    self.detect_joins(expr, scope)?;
                }
                Some(JoinConstraint::Using(names)) => {
                    for name in names {
                        let column = object_parts(name).pop().unwrap_or_default();
                        let lookup = |source: &Source| match self.lookup(source, &column) {
                            Lookup::Found(found) => found,
                            Lookup::Missing => None,
                        };
                        let left = scope.sources[..right_index].iter().find_map(lookup);
                        let right = scope.sources[right_index..next].iter().find_map(lookup);
                        match (left, right) {
                            (Some(l), Some(r)) => {
                                self.columns.insert(l.clone());
                                self.columns.insert(r.clone());
                                self.push_join(l, r);
                            }
                            _ => return Err(SqlError::UnknownColumn(column)),
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(next)
    }

    fn factor_constraints(
        &mut self,
        factor: &TableFactor,
        scope: &Scope<'_>,
        ctes: &Ctes,
        offset: usize,
    ) -> Result<usize, SqlError> {
        match factor {
            TableFactor::NestedJoin { table_with_joins, .. } => {
                self.join_constraints(table_with_joins, scope, ctes, offset)
            }
            _ => Ok(offset + 1),
        }
    }

    fn push_join(&mut self, left: ColumnRef, right: ColumnRef) {
        if left.table == right.table {
            return;
        }
        let pair = JoinPair { left, right };
        if !self.joins.iter().any(|p| p.same_as(&pair)) {
            self.joins.push(pair);
        }
    }

    /// Records equalities between columns of two distinct tables among the
    /// conjuncts of `expr`.
    fn detect_joins(&mut self, expr: &Expr, scope: &Scope<'_>) -> Result<(), SqlError> {
        match expr {
            Expr::Nested(inner) => self.detect_joins(inner, scope),
            Expr::BinaryOp {
                left,
                op: BinaryOperator::And,
                right,
            } => {
                self.detect_joins(left, scope)?;
                self.detect_joins(right, scope)
            }
            Expr::BinaryOp {
                left,
                op: BinaryOperator::Eq,
                right,
            } => {
                let (Some(l), Some(r)) = (column_idents(left), column_idents(right)) else {
                    return Ok(());
                };
                if let (Some(l), Some(r)) = (self.resolve(&l, scope)?, self.resolve(&r, scope)?) {
                    self.push_join(l, r);
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn origin_of(&self, expr: &Expr, scope: &Scope<'_>) -> Result<Option<ColumnRef>, SqlError> {
        match column_idents(expr) {
            Some(ids) => self.resolve(&ids, scope),
            None => Ok(None),
        }
    }

    fn lookup(&self, source: &Source, column: &str) -> Lookup {
        match &source.kind {
            SourceKind::Table(name) => match self.catalog.table(name).and_then(|t| {
                t.columns
                    .iter()
                    .find(|c| key(&c.name) == key(column))
                    .map(|c| ColumnRef::new(&t.name, &c.name))
            }) {
                Some(found) => Lookup::Found(Some(found)),
                None => Lookup::Missing,
            },
            SourceKind::Derived(cols) => match cols.iter().find(|c| key(&c.name) == key(column)) {
                Some(c) => Lookup::Found(c.origin.clone()),
                None => Lookup::Missing,
            },
            SourceKind::Opaque => Lookup::Missing,
        }
    }

    /// Resolves a (possibly qualified) column reference to a catalog column.
    /// `Ok(None)` means the reference is valid but not a catalog column
    /// (a computed derived column or a select-list alias).
    fn resolve(&self, idents: &[&Ident], scope: &Scope<'_>) -> Result<Option<ColumnRef>, SqlError> {
        let column = idents.last().map(|i| i.value.as_str()).unwrap_or_default();
        if idents.len() == 1 {
            let mut current = Some(scope);
            while let Some(sc) = current {
                let mut hits = Vec::new();
                for source in &sc.sources {
                    if let Lookup::Found(found) = self.lookup(source, column) {
                        hits.push((source, found));
                    }
                }
                match hits.len() {
                    0 => {}
                    1 => return Ok(hits.pop().and_then(|(_, found)| found)),
                    _ => {
                        return Err(SqlError::Ambiguous {
                            column: column.to_string(),
                            candidates: hits
                                .iter()
                                .map(|(source, found)| match (found, &source.binding) {
                                    (Some(found), _) => found.to_string(),
                                    (None, Some(b)) => format!("{b}.{column}"),
                                    (None, None) => format!("<derived>.{column}"),
                                })
                                .collect(),
                        })
                    }
                }
                if sc.aliases.contains(&key(column)) {
                    return Ok(None);
                }
                current = sc.parent;
            }
            if NILADIC.iter().any(|n| n.eq_ignore_ascii_case(column)) {
                return Ok(None);
            }
            return Err(SqlError::UnknownColumn(column.to_string()));
        }

        let qualifier = &idents[idents.len() - 2].value;
        let mut current = Some(scope);
        while let Some(sc) = current {
            if let Some(source) = sc
                .sources
                .iter()
                .find(|s| s.binding.as_deref().map(key) == Some(key(qualifier)))
            {
                return match self.lookup(source, column) {
                    Lookup::Found(found) => Ok(found),
                    Lookup::Missing => Err(SqlError::UnknownColumn(format!("{qualifier}.{column}"))),
                };
            }
            current = sc.parent;
        }
        Err(SqlError::UnknownTable(qualifier.clone()))
    }

    fn walk(&mut self, expr: &Expr, scope: &Scope<'_>, ctes: &Ctes) -> Result<(), SqlError> {
        let mut walker = Walker {
            analyzer: self,
            scope,
            ctes,
            depth: 0,
        };
        match expr.visit(&mut walker) {
            ControlFlow::Continue(()) => Ok(()),
            ControlFlow::Break(err) => Err(err),
        }
    }
}

struct Walker<'a, 'c, 's> {
    analyzer: &'a mut Analyzer<'c>,
    scope: &'a Scope<'s>,
    ctes: &'a Ctes,
    /// Nesting depth of subqueries; expressions inside a subquery are handled
    /// by the recursive analysis of that subquery instead.
    depth: usize,
}

fn flow(result: Result<(), SqlError>) -> ControlFlow<SqlError> {
    match result {
        Ok(()) => ControlFlow::Continue(()),
        Err(e) => ControlFlow::Break(e),
    }
}

impl Visitor for Walker<'_, '_, '_> {
    type Break = SqlError;

    fn pre_visit_query(&mut self, query: &Query) -> ControlFlow<SqlError> {
        if self.depth == 0 {
            let result = self.analyzer.query(query, self.ctes, Some(self.scope)).map(|_| ());
            flow(result)?;
        }
        self.depth += 1;
        ControlFlow::Continue(())
    }

    fn post_visit_query(&mut self, _query: &Query) -> ControlFlow<SqlError> {
        self.depth -= 1;
        ControlFlow::Continue(())
    }

    fn pre_visit_expr(&mut self, expr: &Expr) -> ControlFlow<SqlError> {
        if self.depth > 0 {
            return ControlFlow::Continue(());
        }
        match expr {
            Expr::Identifier(_) | Expr::CompoundIdentifier(_) => {
                let ids = column_idents(expr).expect("identifier");
                let result = self.analyzer.resolve(&ids, self.scope).map(|found| {
                    if let Some(found) = found {
                        self.analyzer.columns.insert(found);
                    }
                });
                flow(result)
            }
            Expr::Function(function) => {
                let name = object_parts(&function.name)
                    .pop()
                    .unwrap_or_default()
                    .to_ascii_uppercase();
                if DIALECT_ONLY_FUNCTIONS.contains(&name.as_str()) {
                    self.analyzer.dialect_only.insert(name);
                }
                ControlFlow::Continue(())
            }
            _ => ControlFlow::Continue(()),
        }
    }
}
