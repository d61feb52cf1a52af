//! Ingestion of a minimal `CREATE TABLE` DDL subset.
//!
//! Accepted per column: a name, a type keyword (optionally parameterized, as in
//! `VARCHAR(64)` or `NUMERIC(10, 2)`), and an optional description given either
//! as `COMMENT 'text'` or as a trailing `-- text` line comment. A table may
//! carry `COMMENT 'text'` after its closing parenthesis, or a `--` comment on
//! the line(s) directly above `CREATE TABLE`. Constraints, defaults, partition
//! clauses and dialect options are rejected.

use crate::catalog::{Catalog, CatalogError, ColumnDef, DataType, TableDef};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    Str(String),
    Number(String),
    LParen,
    RParen,
    Comma,
    Semi,
    Dot,
    Eq,
    Comment(String),
    Other(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, CatalogError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                line += 1;
                i += 1;
            }
            c if c.is_whitespace() => i += 1,
            '-' if chars.get(i + 1) == Some(&'-') => {
                let start = i + 2;
                let mut end = start;
                while end < chars.len() && chars[end] != '\n' {
                    end += 1;
                }
                let body: String = chars[start..end].iter().collect();
                out.push(Token {
                    tok: Tok::Comment(body.trim().to_string()),
                    line,
                });
                i = end;
            }
            '\'' | '"' | '`' => {
                let quote = c;
                let mut body = String::new();
                let start_line = line;
                i += 1;
                loop {
                    match chars.get(i) {
                        None => {
                            return Err(CatalogError::Ddl {
                                line: start_line,
                                message: format!("unterminated {quote}-quoted text"),
                            })
                        }
                        Some(&ch) if ch == quote => {
                            if chars.get(i + 1) == Some(&quote) {
                                body.push(quote);
                                i += 2;
                            } else {
                                i += 1;
                                break;
                            }
                        }
                        Some(&ch) => {
                            if ch == '\n' {
                                line += 1;
                            }
                            body.push(ch);
                            i += 1;
                        }
                    }
                }
                let tok = if quote == '\'' {
                    Tok::Str(body)
                } else {
                    Tok::Quoted(body)
                };
                out.push(Token { tok, line: start_line });
            }
            '(' => {
                out.push(Token { tok: Tok::LParen, line });
                i += 1;
            }
            ')' => {
                out.push(Token { tok: Tok::RParen, line });
                i += 1;
            }
            ',' => {
                out.push(Token { tok: Tok::Comma, line });
                i += 1;
            }
            ';' => {
                out.push(Token { tok: Tok::Semi, line });
                i += 1;
            }
            '.' => {
                out.push(Token { tok: Tok::Dot, line });
                i += 1;
            }
            '=' => {
                out.push(Token { tok: Tok::Eq, line });
                i += 1;
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Number(chars[start..i].iter().collect()),
                    line,
                });
            }
            c if c.is_alphanumeric() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Word(chars[start..i].iter().collect()),
                    line,
                });
            }
            other => {
                out.push(Token {
                    tok: Tok::Other(other),
                    line,
                });
                i += 1;
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    last_line: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn line(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.last_line, |t| t.line)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        if let Some(t) = &t {
            self.last_line = t.line;
            self.pos += 1;
        }
        t.map(|t| t.tok)
    }

    fn error(&self, message: impl Into<String>) -> CatalogError {
        CatalogError::Ddl {
            line: self.line(),
            message: message.into(),
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), CatalogError> {
        if self.is_keyword(kw) {
            self.next();
            Ok(())
        } else {
            Err(self.error(format!("expected `{kw}`, found {}", self.describe())))
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), CatalogError> {
        if self.peek() == Some(&tok) {
            self.next();
            Ok(())
        } else {
            Err(self.error(format!("expected {what}, found {}", self.describe())))
        }
    }

    fn describe(&self) -> String {
        match self.peek() {
            None => "end of input".into(),
            Some(Tok::Word(w)) | Some(Tok::Number(w)) => format!("`{w}`"),
            Some(Tok::Quoted(w)) => format!("quoted identifier `{w}`"),
            Some(Tok::Str(_)) => "string literal".into(),
            Some(Tok::Comment(_)) => "comment".into(),
            Some(Tok::LParen) => "`(`".into(),
            Some(Tok::RParen) => "`)`".into(),
            Some(Tok::Comma) => "`,`".into(),
            Some(Tok::Semi) => "`;`".into(),
            Some(Tok::Dot) => "`.`".into(),
            Some(Tok::Eq) => "`=`".into(),
            Some(Tok::Other(c)) => format!("`{c}`"),
        }
    }

    /// Skips comments, returning those seen (with their lines).
    fn skip_comments(&mut self) -> Vec<(usize, String)> {
        let mut seen = Vec::new();
        while let Some(Token {
            tok: Tok::Comment(text),
            line,
        }) = self.tokens.get(self.pos).cloned()
        {
            seen.push((line, text));
            self.pos += 1;
        }
        seen
    }

    fn identifier(&mut self) -> Result<String, CatalogError> {
        let mut name = self.single_identifier()?;
        // qualified names keep only the last segment
        while self.peek() == Some(&Tok::Dot) {
            self.next();
            name = self.single_identifier()?;
        }
        // quoted names may carry their own qualification, as in `proj.ds.t`
        Ok(name.rsplit('.').next().unwrap_or_default().to_string())
    }

    fn single_identifier(&mut self) -> Result<String, CatalogError> {
        match self.peek() {
            Some(Tok::Word(_)) | Some(Tok::Quoted(_)) => match self.next() {
                Some(Tok::Word(w)) | Some(Tok::Quoted(w)) => Ok(w),
                _ => unreachable!(),
            },
            _ => Err(self.error(format!("expected identifier, found {}", self.describe()))),
        }
    }

    fn comment_clause(&mut self) -> Result<Option<String>, CatalogError> {
        if !self.is_keyword("COMMENT") {
            return Ok(None);
        }
        self.next();
        if self.peek() == Some(&Tok::Eq) {
            self.next();
        }
        match self.next() {
            Some(Tok::Str(s)) => Ok(Some(s)),
            _ => Err(self.error("expected string literal after COMMENT")),
        }
    }

    fn table(&mut self, leading: Vec<(usize, String)>) -> Result<TableDef, CatalogError> {
        let create_line = self.line();
        self.expect_keyword("CREATE")?;
        if self.is_keyword("OR") || self.is_keyword("TEMP") || self.is_keyword("TEMPORARY") {
            return Err(self.error(format!("unsupported DDL token {}", self.describe())));
        }
        self.expect_keyword("TABLE")?;
        if self.is_keyword("IF") {
            self.next();
            self.expect_keyword("NOT")?;
            self.expect_keyword("EXISTS")?;
        }
        let name = self.identifier()?;
        self.expect(Tok::LParen, "`(`")?;

        let mut columns: Vec<(usize, ColumnDef)> = Vec::new();
        loop {
            for (line, text) in self.skip_comments() {
                attach_comment(&mut columns, line, text);
            }
            if self.peek() == Some(&Tok::RParen) {
                break;
            }
            let line = self.line();
            let column = self.column()?;
            columns.push((line, column));
            for (line, text) in self.skip_comments() {
                attach_comment(&mut columns, line, text);
            }
            match self.peek() {
                Some(Tok::Comma) => {
                    self.next();
                }
                Some(Tok::RParen) => {}
                _ => {
                    return Err(self.error(format!(
                        "unsupported DDL token {} in column definition",
                        self.describe()
                    )))
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;

        // `--` lines directly above CREATE TABLE describe the table
        let mut description = String::new();
        let mut expected_line = create_line;
        let mut above = Vec::new();
        for (line, text) in leading.iter().rev() {
            if *line + 1 == expected_line {
                above.push(text.as_str());
                expected_line = *line;
            } else {
                break;
            }
        }
        above.reverse();
        if !above.is_empty() {
            description = above.join(" ");
        }
        if let Some(text) = self.comment_clause()? {
            description = text;
        }
        match self.peek() {
            None | Some(Tok::Semi) | Some(Tok::Comment(_)) => {}
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case("CREATE") => {}
            _ => {
                return Err(self.error(format!(
                    "unsupported DDL token {} after table definition",
                    self.describe()
                )))
            }
        }
        Ok(TableDef {
            name,
            description,
            columns: columns.into_iter().map(|(_, c)| c).collect(),
        })
    }

    fn column(&mut self) -> Result<ColumnDef, CatalogError> {
        let name = self.identifier()?;
        let type_token = match self.next() {
            Some(Tok::Word(w)) => w,
            _ => return Err(self.error(format!("expected a type for column `{name}`"))),
        };
        if matches!(self.peek(), Some(Tok::Other('<'))) {
            return Err(CatalogError::UnsupportedType {
                token: format!("{type_token}<...>"),
            });
        }
        let data_type = DataType::from_keyword(&type_token)?;
        if self.peek() == Some(&Tok::LParen) {
            self.next();
            loop {
                match self.next() {
                    Some(Tok::Number(_)) | Some(Tok::Comma) => {}
                    Some(Tok::RParen) => break,
                    _ => return Err(self.error(format!("malformed type parameters for `{name}`"))),
                }
            }
        }
        let mut column = ColumnDef::new(name, data_type);
        if let Some(text) = self.comment_clause()? {
            column.description = text;
        }
        Ok(column)
    }
}

fn attach_comment(columns: &mut [(usize, ColumnDef)], line: usize, text: String) {
    if let Some((col_line, col)) = columns.last_mut() {
        if *col_line == line && col.description.is_empty() {
            col.description = text;
        }
    }
}

/// Parses one or more `CREATE TABLE` statements into a validated catalog with
/// no relationships.
pub fn parse_ddl(text: &str) -> Result<Catalog, CatalogError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        last_line: 1,
    };
    let mut tables = Vec::new();
    let mut leading = Vec::new();
    loop {
        match parser.peek() {
            None => break,
            Some(Tok::Semi) => {
                parser.next();
            }
            Some(Tok::Comment(_)) => leading.extend(parser.skip_comments()),
            _ => tables.push(parser.table(std::mem::take(&mut leading))?),
        }
    }
    if tables.is_empty() {
        return Err(CatalogError::Ddl {
            line: 1,
            message: "no CREATE TABLE statement found".into(),
        });
    }
    Catalog::new(tables, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_table() {
        let catalog = parse_ddl("CREATE TABLE t (id INTEGER, amt FLOAT)").unwrap();
        assert_eq!(catalog.tables().len(), 1);
        let t = &catalog.tables()[0];
        assert_eq!(t.name, "t");
        assert_eq!(t.columns.len(), 2);
        assert_eq!(t.columns[1].data_type, DataType::Float);
    }

    #[test]
    fn comments_become_descriptions() {
        let ddl = "\
-- daily store sales
CREATE TABLE sales (
  store_id INT64, -- store identifier
  amount NUMERIC(12, 2) COMMENT 'daily sales amount',
  note STRING
);
CREATE TABLE `proj.ds.stores` (store_id INTEGER) COMMENT = 'store master';
";
        let catalog = parse_ddl(ddl).unwrap();
        let sales = catalog.table("sales").unwrap();
        assert_eq!(sales.description, "daily store sales");
        assert_eq!(sales.columns[0].description, "store identifier");
        assert_eq!(sales.columns[1].description, "daily sales amount");
        assert_eq!(sales.columns[2].description, "");
        assert_eq!(catalog.table("stores").unwrap().description, "store master");
    }

    #[test]
    fn constraints_rejected() {
        let err = parse_ddl("CREATE TABLE t (id INTEGER NOT NULL)").unwrap_err();
        assert!(err.to_string().contains("`NOT`"), "{err}");
        let err = parse_ddl("CREATE TABLE t (id INTEGER) PARTITION BY id").unwrap_err();
        assert!(err.to_string().contains("`PARTITION`"), "{err}");
    }

    #[test]
    fn unsupported_type_names_token() {
        let err = parse_ddl("CREATE TABLE t (g GEOGRAPHY)").unwrap_err();
        assert!(matches!(err, CatalogError::UnsupportedType { ref token } if token == "GEOGRAPHY"));
        let err = parse_ddl("CREATE TABLE t (g ARRAY<INT64>)").unwrap_err();
        assert!(matches!(err, CatalogError::UnsupportedType { .. }));
    }

    #[test]
    fn duplicate_tables_rejected() {
        let err = parse_ddl("CREATE TABLE t (a INT); CREATE TABLE t (b INT);").unwrap_err();
        assert_eq!(err.to_string(), "duplicate table name `t`");
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = parse_ddl("CREATE TABLE t (\n a INT,\n b\n)").unwrap_err();
        assert!(matches!(err, CatalogError::Ddl { line: 4, .. }), "{err:?}");
    }
}
