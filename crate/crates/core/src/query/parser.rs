//! Recursive-descent parser. Every failure is a SyntaxError carrying the
//! offending token's position and what would have been accepted there;
//! reserved words cannot be used as identifiers.

use crate::error::{EngineError, Result, SyntaxError};
use crate::query::ast::*;
use crate::query::token::{tokenize, Kind, Token};
use crate::value::PropertyValue;

pub fn parse(text: &str) -> Result<Statement> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0 };
    let stmt = p.statement()?;
    p.eat(Kind::Semi);
    p.expect(Kind::Eof)?;
    Ok(stmt)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn peek_kind(&self) -> Kind {
        self.peek().kind
    }

    fn peek2_kind(&self) -> Kind {
        self.toks[(self.pos + 1).min(self.toks.len() - 1)].kind
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn at(&self, kind: Kind) -> bool {
        self.peek_kind() == kind
    }

    fn eat(&mut self, kind: Kind) -> bool {
        if self.at(kind) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn describe_found(t: &Token) -> String {
        match t.kind {
            Kind::Ident => format!("identifier '{}'", t.text),
            Kind::Int | Kind::Float => format!("number '{}'", t.text),
            Kind::Str => "string".into(),
            Kind::Param => format!("parameter ${}", t.text),
            k => k.describe().to_string(),
        }
    }

    fn error_here(&self, expected: Vec<&'static str>) -> EngineError {
        let t = self.peek();
        EngineError::Syntax(SyntaxError {
            offset: t.offset,
            line: t.line,
            column: t.column,
            found: Self::describe_found(t),
            expected,
        })
    }

    fn expect(&mut self, kind: Kind) -> Result<Token> {
        if self.at(kind) {
            Ok(self.bump())
        } else {
            Err(self.error_here(vec![kind.describe()]))
        }
    }

    fn ident(&mut self, what: &'static str) -> Result<String> {
        if self.at(Kind::Ident) {
            Ok(self.bump().text)
        } else {
            Err(self.error_here(vec![what]))
        }
    }

    /// Like `ident`, but also takes soft keywords, so names such as
    /// `vector.search` or an `index` column survive keyword lexing.
    fn name(&mut self, what: &'static str) -> Result<String> {
        match self.peek_kind() {
            Kind::Ident => Ok(self.bump().text),
            Kind::Vector | Kind::Index | Kind::On | Kind::Options => {
                Ok(self.bump().text.to_ascii_lowercase())
            }
            _ => Err(self.error_here(vec![what])),
        }
    }

    // ----- statements ---------------------------------------------------

    fn statement(&mut self) -> Result<Statement> {
        match self.peek_kind() {
            Kind::Match => self.match_led(),
            Kind::Create => {
                if self.peek2_kind() == Kind::Vector {
                    self.vector_index_ddl()
                } else {
                    self.bump();
                    let patterns = self.pattern_list()?;
                    Ok(Statement::Create(CreateStmt {
                        matches: Vec::new(),
                        where_clause: None,
                        patterns,
                    }))
                }
            }
            Kind::Call => self.call_stmt(),
            _ => Err(self.error_here(vec!["MATCH", "CREATE", "CALL"])),
        }
    }

    /// MATCH-led: one or more MATCH clauses, then either RETURN or CREATE.
    fn match_led(&mut self) -> Result<Statement> {
        let mut matches = Vec::new();
        let mut where_clause: Option<Expr> = None;
        while self.eat(Kind::Match) {
            matches.push(MatchClause {
                patterns: self.pattern_list()?,
            });
            if self.eat(Kind::Where) {
                let e = self.expr()?;
                where_clause = Some(match where_clause {
                    None => e,
                    Some(prev) => Expr::And(Box::new(prev), Box::new(e)),
                });
            }
        }
        match self.peek_kind() {
            Kind::Return => {
                let ret = self.return_clause()?;
                Ok(Statement::Query(ReadQuery {
                    matches,
                    where_clause,
                    ret,
                }))
            }
            Kind::Create => {
                self.bump();
                let patterns = self.pattern_list()?;
                Ok(Statement::Create(CreateStmt {
                    matches,
                    where_clause,
                    patterns,
                }))
            }
            _ => Err(self.error_here(vec!["MATCH", "WHERE", "RETURN", "CREATE"])),
        }
    }

    fn vector_index_ddl(&mut self) -> Result<Statement> {
        self.expect(Kind::Create)?;
        self.expect(Kind::Vector)?;
        self.expect(Kind::Index)?;
        let name = self.ident("index name")?;
        self.expect(Kind::On)?;
        let label = self.ident("label name")?;
        self.expect(Kind::LParen)?;
        let field = self.ident("field name")?;
        self.expect(Kind::RParen)?;
        let mut options = Vec::new();
        if self.eat(Kind::Options) {
            self.expect(Kind::LBrace)?;
            if !self.at(Kind::RBrace) {
                loop {
                    let key = self.ident("option name")?;
                    self.expect(Kind::Colon)?;
                    let value = self.expr()?;
                    options.push((key, value));
                    if !self.eat(Kind::Comma) {
                        break;
                    }
                }
            }
            self.expect(Kind::RBrace)?;
        }
        Ok(Statement::CreateVectorIndex(IndexDdl {
            name,
            label,
            field,
            options,
        }))
    }

    fn call_stmt(&mut self) -> Result<Statement> {
        self.expect(Kind::Call)?;
        let mut proc = self.name("procedure name")?;
        while self.eat(Kind::Dot) {
            proc.push('.');
            proc.push_str(&self.name("procedure name part")?);
        }
        self.expect(Kind::LParen)?;
        let mut args = Vec::new();
        if !self.at(Kind::RParen) {
            loop {
                args.push(self.expr()?);
                if !self.eat(Kind::Comma) {
                    break;
                }
            }
        }
        self.expect(Kind::RParen)?;
        let mut yields = Vec::new();
        if self.eat(Kind::Yield) {
            loop {
                yields.push(self.ident("yield column")?);
                if !self.eat(Kind::Comma) {
                    break;
                }
            }
        }
        let mut matches = Vec::new();
        let mut where_clause: Option<Expr> = None;
        while self.eat(Kind::Match) {
            matches.push(MatchClause {
                patterns: self.pattern_list()?,
            });
            if self.eat(Kind::Where) {
                let e = self.expr()?;
                where_clause = Some(match where_clause {
                    None => e,
                    Some(prev) => Expr::And(Box::new(prev), Box::new(e)),
                });
            }
        }
        let ret = if self.at(Kind::Return) {
            Some(self.return_clause()?)
        } else {
            None
        };
        Ok(Statement::Call(CallStmt {
            proc,
            args,
            yields,
            matches,
            where_clause,
            ret,
        }))
    }

    // ----- patterns -----------------------------------------------------

    fn pattern_list(&mut self) -> Result<Vec<Pattern>> {
        let mut out = vec![self.pattern()?];
        while self.eat(Kind::Comma) {
            out.push(self.pattern()?);
        }
        Ok(out)
    }

    fn pattern(&mut self) -> Result<Pattern> {
        let start = self.node_pat()?;
        let mut steps = Vec::new();
        loop {
            let dir_in = match self.peek_kind() {
                Kind::Minus => false,
                Kind::LeftArrow => true,
                _ => break,
            };
            self.bump();
            self.expect(Kind::LBracket)?;
            let mut var = None;
            if self.at(Kind::Ident) {
                var = Some(self.bump().text);
            }
            let mut label = None;
            if self.eat(Kind::Colon) {
                label = Some(self.ident("edge label")?);
            }
            let mut hops = None;
            if self.eat(Kind::Star) {
                let lo_tok = self.expect(Kind::Int)?;
                let lo = self.int_in_range(&lo_tok, 1, 10)?;
                let hi = if self.eat(Kind::DotDot) {
                    let hi_tok = self.expect(Kind::Int)?;
                    self.int_in_range(&hi_tok, 1, 10)?
                } else {
                    lo
                };
                if lo > hi {
                    return Err(EngineError::Syntax(SyntaxError {
                        offset: lo_tok.offset,
                        line: lo_tok.line,
                        column: lo_tok.column,
                        found: format!("range {lo}..{hi}"),
                        expected: vec!["min <= max"],
                    }));
                }
                hops = Some((lo, hi));
            }
            let props = if self.at(Kind::LBrace) {
                self.prop_map()?
            } else {
                Vec::new()
            };
            self.expect(Kind::RBracket)?;
            if dir_in {
                self.expect(Kind::Minus)?;
            } else {
                self.expect(Kind::Arrow)?;
            }
            let node = self.node_pat()?;
            steps.push((
                EdgePat {
                    var,
                    label,
                    dir: if dir_in { PatDir::In } else { PatDir::Out },
                    hops,
                    props,
                },
                node,
            ));
        }
        Ok(Pattern { start, steps })
    }

    fn int_in_range(&self, tok: &Token, lo: u32, hi: u32) -> Result<u32> {
        let v: u32 = tok.text.parse().map_err(|_| {
            EngineError::Syntax(SyntaxError {
                offset: tok.offset,
                line: tok.line,
                column: tok.column,
                found: format!("number '{}'", tok.text),
                expected: vec!["hop count 1..10"],
            })
        })?;
        if v < lo || v > hi {
            return Err(EngineError::Syntax(SyntaxError {
                offset: tok.offset,
                line: tok.line,
                column: tok.column,
                found: format!("number '{}'", tok.text),
                expected: vec!["hop count 1..10"],
            }));
        }
        Ok(v)
    }

    fn node_pat(&mut self) -> Result<NodePat> {
        self.expect(Kind::LParen)?;
        let mut var = None;
        if self.at(Kind::Ident) {
            var = Some(self.bump().text);
        }
        let mut label = None;
        if self.eat(Kind::Colon) {
            label = Some(self.ident("vertex label")?);
        }
        let props = if self.at(Kind::LBrace) {
            self.prop_map()?
        } else {
            Vec::new()
        };
        self.expect(Kind::RParen)?;
        Ok(NodePat { var, label, props })
    }

    fn prop_map(&mut self) -> Result<Vec<(String, Expr)>> {
        self.expect(Kind::LBrace)?;
        let mut props = Vec::new();
        if !self.at(Kind::RBrace) {
            loop {
                let key = self.ident("property name")?;
                self.expect(Kind::Colon)?;
                props.push((key, self.expr()?));
                if !self.eat(Kind::Comma) {
                    break;
                }
            }
        }
        self.expect(Kind::RBrace)?;
        Ok(props)
    }

    // ----- RETURN ---------------------------------------------------------

    fn return_clause(&mut self) -> Result<ReturnClause> {
        self.expect(Kind::Return)?;
        let mut items = Vec::new();
        loop {
            let e = self.expr()?;
            let alias = if self.eat(Kind::As) {
                Some(self.ident("alias")?)
            } else {
                None
            };
            items.push((e, alias));
            if !self.eat(Kind::Comma) {
                break;
            }
        }
        let mut order = Vec::new();
        if self.eat(Kind::Order) {
            self.expect(Kind::By)?;
            loop {
                let e = self.expr()?;
                let asc = if self.eat(Kind::Desc) {
                    false
                } else {
                    self.eat(Kind::Asc);
                    true
                };
                order.push((e, asc));
                if !self.eat(Kind::Comma) {
                    break;
                }
            }
        }
        let mut limit = None;
        if self.eat(Kind::Limit) {
            let tok = self.expect(Kind::Int)?;
            limit = Some(tok.text.parse().map_err(|_| {
                EngineError::Syntax(SyntaxError {
                    offset: tok.offset,
                    line: tok.line,
                    column: tok.column,
                    found: format!("number '{}'", tok.text),
                    expected: vec!["row limit"],
                })
            })?);
        }
        Ok(ReturnClause {
            items,
            order,
            limit,
        })
    }

    // ----- expressions ----------------------------------------------------

    fn expr(&mut self) -> Result<Expr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr> {
        let mut left = self.and_expr()?;
        while self.eat(Kind::Or) {
            let right = self.and_expr()?;
            left = Expr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut left = self.not_expr()?;
        while self.eat(Kind::And) {
            let right = self.not_expr()?;
            left = Expr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr> {
        if self.eat(Kind::Not) {
            Ok(Expr::Not(Box::new(self.not_expr()?)))
        } else {
            self.comparison()
        }
    }

    fn comparison(&mut self) -> Result<Expr> {
        let left = self.primary()?;
        let op = match self.peek_kind() {
            Kind::Eq => CmpOp::Eq,
            Kind::Ne => CmpOp::Ne,
            Kind::Lt => CmpOp::Lt,
            Kind::Le => CmpOp::Le,
            Kind::Gt => CmpOp::Gt,
            Kind::Ge => CmpOp::Ge,
            _ => return Ok(left),
        };
        self.bump();
        let right = self.primary()?;
        Ok(Expr::Cmp(op, Box::new(left), Box::new(right)))
    }

    fn number_literal(&mut self, negative: bool) -> Result<Expr> {
        let tok = self.bump();
        match tok.kind {
            Kind::Int => {
                let v: i64 = tok.text.parse().map_err(|_| {
                    EngineError::Syntax(SyntaxError {
                        offset: tok.offset,
                        line: tok.line,
                        column: tok.column,
                        found: format!("number '{}'", tok.text),
                        expected: vec!["integer in range"],
                    })
                })?;
                Ok(Expr::Literal(PropertyValue::Int(if negative { -v } else { v })))
            }
            Kind::Float => {
                let v: f64 = tok.text.parse().map_err(|_| {
                    EngineError::Syntax(SyntaxError {
                        offset: tok.offset,
                        line: tok.line,
                        column: tok.column,
                        found: format!("number '{}'", tok.text),
                        expected: vec!["float in range"],
                    })
                })?;
                Ok(Expr::Literal(PropertyValue::Float(if negative {
                    -v
                } else {
                    v
                })))
            }
            _ => unreachable!("guarded by caller"),
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek_kind() {
            Kind::Int | Kind::Float => self.number_literal(false),
            Kind::Minus => {
                self.bump();
                if matches!(self.peek_kind(), Kind::Int | Kind::Float) {
                    self.number_literal(true)
                } else {
                    Err(self.error_here(vec!["number"]))
                }
            }
            Kind::Str => Ok(Expr::Literal(PropertyValue::Text(self.bump().text))),
            Kind::True => {
                self.bump();
                Ok(Expr::Literal(PropertyValue::Bool(true)))
            }
            Kind::False => {
                self.bump();
                Ok(Expr::Literal(PropertyValue::Bool(false)))
            }
            Kind::Null => {
                self.bump();
                Ok(Expr::Literal(PropertyValue::Null))
            }
            Kind::Param => Ok(Expr::Param(self.bump().text)),
            Kind::LBracket => {
                self.bump();
                let mut items = Vec::new();
                if !self.at(Kind::RBracket) {
                    loop {
                        items.push(self.expr()?);
                        if !self.eat(Kind::Comma) {
                            break;
                        }
                    }
                }
                self.expect(Kind::RBracket)?;
                Ok(Expr::Array(items))
            }
            Kind::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Kind::RParen)?;
                Ok(e)
            }
            Kind::Ident => {
                let name = self.bump().text;
                if self.eat(Kind::LParen) {
                    if name.eq_ignore_ascii_case("count") {
                        if self.eat(Kind::Star) {
                            self.expect(Kind::RParen)?;
                            return Ok(Expr::Count(None));
                        }
                        let inner = self.expr()?;
                        self.expect(Kind::RParen)?;
                        return Ok(Expr::Count(Some(Box::new(inner))));
                    }
                    let mut args = Vec::new();
                    if !self.at(Kind::RParen) {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat(Kind::Comma) {
                                break;
                            }
                        }
                    }
                    self.expect(Kind::RParen)?;
                    return Ok(Expr::Fun(name.to_ascii_lowercase(), args));
                }
                if self.eat(Kind::Dot) {
                    let field = self.ident("property name")?;
                    return Ok(Expr::Prop(name, field));
                }
                Ok(Expr::Var(name))
            }
            _ => Err(self.error_here(vec![
                "literal",
                "parameter",
                "identifier",
                "'('",
                "'['",
                "NOT",
                "'-'",
            ])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_hop_pattern_from_the_reference_workload() {
        let stmt =
            parse("MATCH (m:person)-[e:knows * 2]->(n:person) RETURN n LIMIT 1000;").unwrap();
        let Statement::Query(q) = stmt else {
            panic!("expected a read query")
        };
        assert_eq!(q.matches.len(), 1);
        let pat = &q.matches[0].patterns[0];
        assert_eq!(pat.start.var.as_deref(), Some("m"));
        assert_eq!(pat.start.label.as_deref(), Some("person"));
        let (edge, node) = &pat.steps[0];
        assert_eq!(edge.var.as_deref(), Some("e"));
        assert_eq!(edge.label.as_deref(), Some("knows"));
        assert_eq!(edge.hops, Some((2, 2)));
        assert_eq!(edge.dir, PatDir::Out);
        assert_eq!(node.label.as_deref(), Some("person"));
        assert_eq!(q.ret.items.len(), 1);
        assert_eq!(q.ret.items[0].0, Expr::Var("n".into()));
        assert_eq!(q.ret.limit, Some(1000));
    }

    #[test]
    fn projection_and_range_bounds() {
        let stmt = parse("MATCH (m:person) RETURN m.firstName LIMIT 1000").unwrap();
        let Statement::Query(q) = stmt else {
            panic!()
        };
        assert_eq!(
            q.ret.items[0].0,
            Expr::Prop("m".into(), "firstName".into())
        );

        let stmt = parse("MATCH (a)-[:knows*1..3]->(b) RETURN b").unwrap();
        let Statement::Query(q) = stmt else {
            panic!()
        };
        assert_eq!(q.matches[0].patterns[0].steps[0].0.hops, Some((1, 3)));
    }

    #[test]
    fn hop_bounds_outside_one_to_ten_are_rejected() {
        assert!(parse("MATCH (a)-[:k*0]->(b) RETURN b").is_err());
        assert!(parse("MATCH (a)-[:k*11]->(b) RETURN b").is_err());
        assert!(parse("MATCH (a)-[:k*3..2]->(b) RETURN b").is_err());
    }

    #[test]
    fn unbalanced_pattern_points_at_the_gap() {
        let err = parse("MATCH (n").unwrap_err();
        let EngineError::Syntax(e) = err else {
            panic!("expected syntax error")
        };
        assert_eq!(e.offset, 8);
        assert_eq!(e.found, "end of input");
        assert!(!e.expected.is_empty());
    }

    #[test]
    fn where_order_by_and_boolean_precedence() {
        let stmt = parse(
            "MATCH (n:person) WHERE n.age > 30 AND n.city = 'ber' OR NOT n.active \
             RETURN n.age AS a ORDER BY n.age DESC, n.city LIMIT 5",
        )
        .unwrap();
        let Statement::Query(q) = stmt else {
            panic!()
        };
        // OR binds loosest: ((age>30 AND city='ber') OR (NOT active)).
        let Some(Expr::Or(left, right)) = q.where_clause else {
            panic!("expected OR at the top")
        };
        assert!(matches!(*left, Expr::And(_, _)));
        assert!(matches!(*right, Expr::Not(_)));
        assert_eq!(q.ret.items[0].1.as_deref(), Some("a"));
        assert_eq!(q.ret.order.len(), 2);
        assert!(!q.ret.order[0].1);
        assert!(q.ret.order[1].1);
    }

    #[test]
    fn incoming_edges_and_property_maps() {
        let stmt = parse("MATCH (a:person {name: 'x'})<-[:knows]-(b) RETURN b").unwrap();
        let Statement::Query(q) = stmt else {
            panic!()
        };
        let pat = &q.matches[0].patterns[0];
        assert_eq!(pat.start.props.len(), 1);
        assert_eq!(pat.steps[0].0.dir, PatDir::In);
    }

    #[test]
    fn create_vertices_and_edges() {
        let stmt = parse("CREATE (a:person {name: 'ada', age: 36})").unwrap();
        let Statement::Create(c) = stmt else {
            panic!()
        };
        assert!(c.matches.is_empty());
        assert_eq!(c.patterns[0].start.props.len(), 2);

        let stmt = parse(
            "MATCH (a:person {name: 'x'}), (b:person {name: 'y'}) CREATE (a)-[:knows]->(b)",
        )
        .unwrap();
        let Statement::Create(c) = stmt else {
            panic!()
        };
        assert_eq!(c.matches[0].patterns.len(), 2);
        assert_eq!(c.patterns[0].steps.len(), 1);
    }

    #[test]
    fn call_with_yield_and_return() {
        let stmt = parse("CALL pagerank(0.85, 50, 1e-8) YIELD vertex, score \
                          RETURN vertex ORDER BY score DESC LIMIT 10")
        .unwrap();
        let Statement::Call(c) = stmt else { panic!() };
        assert_eq!(c.proc, "pagerank");
        assert_eq!(c.args.len(), 3);
        assert_eq!(c.yields, vec!["vertex", "score"]);
        assert!(c.ret.is_some());

        let stmt = parse("CALL vector.search('emb', $q, 10) YIELD vertex, score").unwrap();
        let Statement::Call(c) = stmt else { panic!() };
        assert_eq!(c.proc, "vector.search");
        assert_eq!(c.args[1], Expr::Param("q".into()));
    }

    #[test]
    fn vector_index_ddl_with_options() {
        let stmt = parse(
            "CREATE VECTOR INDEX person_emb ON person(emb) \
             OPTIONS {dim: 64, metric: 'cosine', m: 16, ef_construction: 200, payload: ['age']}",
        )
        .unwrap();
        let Statement::CreateVectorIndex(ddl) = stmt else {
            panic!()
        };
        assert_eq!(ddl.name, "person_emb");
        assert_eq!(ddl.label, "person");
        assert_eq!(ddl.field, "emb");
        assert_eq!(ddl.options.len(), 5);
    }

    #[test]
    fn array_literals_params_and_functions() {
        let stmt = parse(
            "MATCH (n:doc) RETURN n ORDER BY vector_distance(n.emb, [0.1, -0.2, 1e-3]) ASC LIMIT 2",
        )
        .unwrap();
        let Statement::Query(q) = stmt else {
            panic!()
        };
        let (Expr::Fun(name, args), asc) = &q.ret.order[0] else {
            panic!("expected function order key")
        };
        assert_eq!(name, "vector_distance");
        assert!(*asc);
        let Expr::Array(items) = &args[1] else {
            panic!()
        };
        assert_eq!(
            items[1],
            Expr::Literal(PropertyValue::Float(-0.2))
        );

        let stmt = parse("MATCH (n:doc) RETURN count(*)").unwrap();
        let Statement::Query(q) = stmt else {
            panic!()
        };
        assert_eq!(q.ret.items[0].0, Expr::Count(None));
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        assert!(parse("MATCH (n:a) RETURN n nonsense").is_err());
        assert!(parse("MATCH (n:a) RETURN n; MATCH").is_err());
        assert!(parse("").is_err());
    }
}
