use crate::error::ParseError;

use super::ast::*;
use super::lexer::{error_at, tokenize, Tok, Token};
use super::spec::{AggFn, Direction, ScoreAgg};

const RESERVED: &[&str] = &[
    "SELECT", "FROM", "WHERE", "COMPARE", "USING", "OVER", "AS", "ORDER", "BY", "ASC", "DESC",
    "LIMIT", "AND",
];

pub fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(word))
}

pub fn parse_query(text: &str) -> Result<Query, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        text,
        tokens,
        pos: 0,
    };
    let q = p.query()?;
    while p.eat(&Tok::Semicolon) {}
    if let Some(t) = p.peek() {
        return Err(p.error(t.span.start, "unexpected input after end of query"));
    }
    Ok(q)
}

struct Parser<'a> {
    text: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, offset: usize, msg: impl Into<String>) -> ParseError {
        error_at(self.text, offset, msg)
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_tok(&self) -> Option<&Tok> {
        self.peek().map(|t| &t.tok)
    }

    fn peek_at(&self, n: usize) -> Option<&Tok> {
        self.tokens.get(self.pos + n).map(|t| &t.tok)
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.text.len(), |t| t.span.start)
    }

    fn last_end(&self) -> usize {
        self.pos
            .checked_sub(1)
            .and_then(|i| self.tokens.get(i))
            .map_or(0, |t| t.span.end)
    }

    fn advance(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek_tok() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<Span, ParseError> {
        match self.peek() {
            Some(t) if &t.tok == tok => {
                let s = t.span;
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn unexpected(&self, what: &str) -> ParseError {
        match self.peek() {
            Some(t) => self.error(t.span.start, format!("expected {what}, found {}", describe(&t.tok))),
            None => self.error(self.text.len(), format!("expected {what}, found end of input")),
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek_tok(), Some(Tok::Ident(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<Span, ParseError> {
        if self.is_keyword(kw) {
            Ok(self.advance().expect("peeked").span)
        } else {
            Err(self.unexpected(kw))
        }
    }

    fn ident(&mut self, what: &str) -> Result<Ident, ParseError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Ident(w),
                span,
            }) if !is_reserved(w) => {
                let id = Ident {
                    name: w.clone(),
                    span: *span,
                };
                self.pos += 1;
                Ok(id)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn at_ident(&self) -> bool {
        matches!(self.peek_tok(), Some(Tok::Ident(w)) if !is_reserved(w))
    }

    fn query(&mut self) -> Result<Query, ParseError> {
        let mut select = None;
        let mut from = None;
        let mut where_clause = Vec::new();
        if self.eat_keyword("SELECT") {
            select = Some(if self.eat(&Tok::Star) {
                SelectList::Star
            } else {
                let mut cols = vec![self.column_ref()?];
                while self.eat(&Tok::Comma) {
                    cols.push(self.column_ref()?);
                }
                SelectList::Columns(cols)
            });
            self.expect_keyword("FROM")?;
            let table = self.ident("table name")?;
            let alias = if self.eat_keyword("AS") || self.at_ident() {
                Some(self.ident("table alias")?)
            } else {
                None
            };
            from = Some(TableRef { table, alias });
            if self.eat_keyword("WHERE") {
                where_clause = self.conditions()?;
            }
        }
        let compare = self.compare()?;
        let order_by = if self.eat_keyword("ORDER") {
            self.expect_keyword("BY")?;
            let column = self.column_ref()?;
            let direction = if self.eat_keyword("ASC") {
                Some(Direction::Asc)
            } else if self.eat_keyword("DESC") {
                Some(Direction::Desc)
            } else {
                None
            };
            Some(OrderBy { column, direction })
        } else {
            None
        };
        let limit = if self.eat_keyword("LIMIT") {
            match self.peek().cloned() {
                Some(Token {
                    tok: Tok::Int(n),
                    span,
                }) if n >= 0 => {
                    self.pos += 1;
                    Some(Limit {
                        count: n as u64,
                        span,
                    })
                }
                _ => return Err(self.unexpected("non-negative integer after LIMIT")),
            }
        } else {
            None
        };
        Ok(Query {
            select,
            from,
            where_clause,
            compare,
            order_by,
            limit,
        })
    }

    fn conditions(&mut self) -> Result<Vec<Condition>, ParseError> {
        let mut out = Vec::new();
        loop {
            if self.peek_tok() == Some(&Tok::LParen) {
                self.pos += 1;
                out.extend(self.conditions()?);
                self.expect(&Tok::RParen, "`)`")?;
            } else {
                let column = self.column_ref()?;
                let op = match self.peek_tok() {
                    Some(Tok::Eq) => CmpOp::Eq,
                    Some(Tok::Ne) => CmpOp::Ne,
                    Some(Tok::Lt) => CmpOp::Lt,
                    Some(Tok::Le) => CmpOp::Le,
                    Some(Tok::Gt) => CmpOp::Gt,
                    Some(Tok::Ge) => CmpOp::Ge,
                    _ => return Err(self.unexpected("comparison operator")),
                };
                self.pos += 1;
                let value = self.literal()?;
                let span = column.span().to(Span::new(self.last_end(), self.last_end()));
                out.push(Condition {
                    column,
                    op,
                    value,
                    span,
                });
            }
            if !self.eat_keyword("AND") {
                return Ok(out);
            }
        }
    }

    fn column_ref(&mut self) -> Result<ColumnRef, ParseError> {
        let first = self.ident("column name")?;
        if self.eat(&Tok::Dot) {
            let column = self.ident("column name after `.`")?;
            Ok(ColumnRef {
                qualifier: Some(first),
                column,
            })
        } else {
            Ok(ColumnRef {
                qualifier: None,
                column: first,
            })
        }
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        let negative = self.eat(&Tok::Minus);
        let lit = match self.peek_tok() {
            Some(Tok::Int(i)) => Literal::Int(if negative { -*i } else { *i }),
            Some(Tok::Float(f)) => Literal::Float(if negative { -*f } else { *f }),
            Some(Tok::Str(s)) if !negative => Literal::Str(s.clone()),
            Some(Tok::Ident(w)) if !negative && !is_reserved(w) => Literal::Word(w.clone()),
            _ => return Err(self.unexpected("literal")),
        };
        self.pos += 1;
        Ok(lit)
    }

    fn optional_alias(&mut self) -> Result<Option<Ident>, ParseError> {
        if self.eat_keyword("AS") {
            Ok(Some(self.ident("alias")?))
        } else {
            Ok(None)
        }
    }

    fn compare(&mut self) -> Result<CompareClause, ParseError> {
        let start = self.expect_keyword("COMPARE")?;
        self.expect(&Tok::LBracket, "`[`")?;
        let left = self.constraint_set()?;
        let form = if self.eat(&Tok::Arrow) {
            let right = self.constraint_set()?;
            self.expect(&Tok::RBracket, "`]`")?;
            self.expect(&Tok::LBracket, "`[` opening the grouping/measure list")?;
            let gms = self.gm_list()?;
            self.expect(&Tok::RBracket, "`]`")?;
            CompareForm::Shared { left, right, gms }
        } else {
            self.expect(&Tok::RBracket, "`<->` or `]`")?;
            self.expect(&Tok::LBracket, "`[` opening the grouping/measure list")?;
            let left_gms = self.gm_list()?;
            self.expect(&Tok::RBracket, "`]`")?;
            self.expect(&Tok::Arrow, "`<->`")?;
            self.expect(&Tok::LBracket, "`[`")?;
            let right = self.constraint_set()?;
            self.expect(&Tok::RBracket, "`]`")?;
            self.expect(&Tok::LBracket, "`[` opening the grouping/measure list")?;
            let right_gms = self.gm_list()?;
            self.expect(&Tok::RBracket, "`]`")?;
            CompareForm::PerSide {
                left,
                left_gms,
                right,
                right_gms,
            }
        };
        let scorer = self.scorer()?;
        Ok(CompareClause {
            form,
            span: start.to(scorer.span),
            scorer,
        })
    }

    fn constraint_set(&mut self) -> Result<ConstraintSet, ParseError> {
        let open = self.expect(&Tok::LParen, "`(` opening a constraint list")?;
        let mut items = vec![self.constraint_item()?];
        while self.eat(&Tok::Comma) {
            items.push(self.constraint_item()?);
        }
        let close = self.expect(&Tok::RParen, "`)` closing the constraint list")?;
        Ok(ConstraintSet {
            items,
            span: open.to(close),
        })
    }

    fn constraint_item(&mut self) -> Result<ConstraintItem, ParseError> {
        let (column, value, parenthesized) = if self.eat(&Tok::LParen) {
            let column = self.column_ref()?;
            let value = if self.eat(&Tok::Eq) {
                Some(self.literal()?)
            } else {
                None
            };
            self.expect(&Tok::RParen, "`)`")?;
            (column, value, true)
        } else {
            let column = self.column_ref()?;
            let value = if self.eat(&Tok::Eq) {
                Some(self.literal()?)
            } else {
                None
            };
            (column, value, false)
        };
        let alias = self.optional_alias()?;
        Ok(match value {
            Some(value) => ConstraintItem::Fixed {
                column,
                value,
                alias,
            },
            None if column.qualifier.is_none() && alias.is_none() && !parenthesized => {
                ConstraintItem::Bare(column.column)
            }
            None => ConstraintItem::All { column, alias },
        })
    }

    fn gm_list(&mut self) -> Result<Vec<GmItem>, ParseError> {
        if self.peek_tok() != Some(&Tok::LParen) {
            // a single pair written without parentheses
            return Ok(vec![self.gm_body()?]);
        }
        let mut out = Vec::new();
        loop {
            let open = self.expect(&Tok::LParen, "`(` opening a grouping/measure pair")?;
            let mut gm = self.gm_body()?;
            let close = self.expect(&Tok::RParen, "`)` closing the grouping/measure pair")?;
            gm.span = open.to(close);
            out.push(gm);
            if !self.eat(&Tok::Comma) {
                return Ok(out);
            }
        }
    }

    fn gm_body(&mut self) -> Result<GmItem, ParseError> {
        let start = self.here();
        let grouping = if self.eat(&Tok::LParen) {
            let column = self.column_ref()?;
            self.expect(&Tok::RParen, "`)`")?;
            GroupingItem::Column {
                column,
                alias: self.optional_alias()?,
            }
        } else {
            let column = self.column_ref()?;
            let alias = self.optional_alias()?;
            if column.qualifier.is_none() && alias.is_none() {
                GroupingItem::Bare(column.column)
            } else {
                GroupingItem::Column { column, alias }
            }
        };
        self.expect(&Tok::Comma, "`,` between grouping and measure")?;
        let measure = if self.at_ident() && self.peek_at(1) == Some(&Tok::LParen) {
            let name = self.ident("aggregate")?;
            let agg = AggFn::parse(&name.name).ok_or_else(|| {
                self.error(
                    name.span.start,
                    format!("unknown aggregate `{}` (expected AVG, SUM, MIN, MAX or COUNT)", name.name),
                )
            })?;
            self.expect(&Tok::LParen, "`(`")?;
            let column = self.column_ref()?;
            self.expect(&Tok::RParen, "`)`")?;
            MeasureItem::Agg {
                agg,
                column,
                alias: self.optional_alias()?,
            }
        } else {
            MeasureItem::Ref(self.ident("aggregate or measure alias")?)
        };
        Ok(GmItem {
            grouping,
            measure,
            span: Span::new(start, self.last_end()),
        })
    }

    fn scorer(&mut self) -> Result<ScorerAst, ParseError> {
        let start = self.expect_keyword("USING")?;
        let name = match self.peek().cloned() {
            Some(Token {
                tok: Tok::Ident(w),
                span,
            }) => (w, span),
            _ => return Err(self.unexpected("scorer aggregate")),
        };
        self.pos += 1;
        let agg = ScoreAgg::parse(&name.0).ok_or_else(|| {
            self.error(
                name.1.start,
                format!("unknown scorer aggregate `{}` (expected SUM, AVG, MIN or MAX)", name.0),
            )
        })?;
        self.expect_keyword("OVER")?;
        if !self.eat_keyword("DIFF") {
            return Err(self.unexpected("DIFF"));
        }
        self.expect(&Tok::LParen, "`(`")?;
        let p = match self.peek().cloned() {
            Some(Token {
                tok: Tok::Int(n),
                span,
            }) => {
                if n < 1 {
                    return Err(self.error(span.start, "p must be ≥ 1"));
                }
                self.pos += 1;
                u32::try_from(n).map_err(|_| self.error(span.start, "p is too large"))?
            }
            _ => return Err(self.unexpected("integer exponent")),
        };
        let close = self.expect(&Tok::RParen, "`)`")?;
        let alias = self.optional_alias()?;
        let end = alias.as_ref().map_or(close, |a| a.span);
        Ok(ScorerAst {
            agg,
            p,
            alias,
            span: start.to(end),
        })
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(w) => format!("`{w}`"),
        Tok::Int(i) => format!("number {i}"),
        Tok::Float(f) => format!("number {f}"),
        Tok::Str(s) => format!("string '{s}'"),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Dot => "`.`".into(),
        Tok::Arrow => "`<->`".into(),
        Tok::Eq => "`=`".into(),
        Tok::Ne => "`!=`".into(),
        Tok::Lt => "`<`".into(),
        Tok::Le => "`<=`".into(),
        Tok::Gt => "`>`".into(),
        Tok::Ge => "`>=`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Semicolon => "`;`".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_query() {
        let q = parse_query("COMPARE [ (x=1) <-> (x=2) ][ g, AVG(m) ] USING SUM OVER DIFF(1)").unwrap();
        assert!(q.select.is_none());
        let CompareForm::Shared { left, right, gms } = &q.compare.form else {
            panic!()
        };
        assert_eq!(left.items.len(), 1);
        assert!(matches!(&right.items[0], ConstraintItem::Fixed { value: Literal::Int(2), .. }));
        assert_eq!(gms.len(), 1);
        assert!(matches!(gms[0].grouping, GroupingItem::Bare(_)));
        assert_eq!(q.compare.scorer.p, 1);
        assert!(q.compare.scorer.alias.is_none());
    }

    #[test]
    fn zero_exponent_is_rejected() {
        let text = "COMPARE [(x=1) <-> (x=2)] [g, AVG(m)] USING SUM OVER DIFF(0)";
        let e = parse_query(text).unwrap_err();
        assert_eq!(e.message, "p must be ≥ 1");
        assert_eq!(e.offset, text.find('0').unwrap());
    }

    #[test]
    fn errors_carry_positions() {
        for bad in [
            "COMPARE [(x=1) <-> (x=2)] [g, AVG(m)] USING SUM OVER DIFF(2) trailing",
            "COMPARE [(x=1) <-> (x=2) [g, AVG(m)] USING SUM OVER DIFF(2)",
            "SELECT FROM t COMPARE",
            "COMPARE [(x=1) <-> (x=2)] [g, FOO(m)] USING SUM OVER DIFF(2)",
            "COMPARE [(x=1) <-> (x=2)] [g, AVG(m)] USING SUM OVER DIFF(2) LIMIT",
        ] {
            let e = parse_query(bad).unwrap_err();
            assert!(e.offset <= bad.len(), "{bad}: {e}");
        }
    }

    #[test]
    fn where_order_limit() {
        let q = parse_query(
            "SELECT * FROM t WHERE (a = 1 AND b != 'x') AND c >= -2.5 COMPARE [(s = 1) <-> (s = 2)] [(g AS G, MAX(m) AS M)] USING MAX OVER DIFF(3) AS d ORDER BY d LIMIT 4;",
        )
        .unwrap();
        assert_eq!(q.where_clause.len(), 3);
        assert_eq!(q.where_clause[2].value, Literal::Float(-2.5));
        assert_eq!(q.order_by.as_ref().unwrap().direction, None);
        assert_eq!(q.limit.as_ref().unwrap().count, 4);
    }

    #[test]
    fn per_side_form() {
        let q = parse_query(
            "COMPARE [(a = 1)][(g, AVG(m))] <-> [(a = 2)][(h, AVG(m))] USING SUM OVER DIFF(2) AS s",
        )
        .unwrap();
        assert!(matches!(q.compare.form, CompareForm::PerSide { .. }));
    }
}
