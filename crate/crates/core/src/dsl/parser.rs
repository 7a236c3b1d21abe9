//! Recursive-descent parser for junction files.
//!
//! Errors inside an item are recorded and the parser resumes at the next
//! top-level keyword, so one pass reports every independent mistake.

use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::diagnostic::{has_errors, Diagnostic, Span};
use super::lexer::{tokenize, Token, TokenKind};
use crate::signal::MovementKind;

const TOP_LEVEL: [&str; 8] = [
    "roads",
    "signals",
    "conflicts",
    "phase",
    "program",
    "emergency",
    "safe",
    "timing",
];

type PResult<T> = Result<T, Diagnostic>;

pub fn parse(source: &str) -> Result<JunctionSpec, Vec<Diagnostic>> {
    let (tokens, mut diagnostics) = tokenize(source);
    let mut parser = Parser {
        tokens,
        pos: 0,
        diagnostics: Vec::new(),
        attempted_phases: HashSet::new(),
    };
    let spec = parser.spec();
    diagnostics.append(&mut parser.diagnostics);
    match spec {
        Some(spec) if !has_errors(&diagnostics) => Ok(spec),
        _ => {
            diagnostics.sort_by_key(|d| d.span);
            Err(diagnostics)
        }
    }
}

#[derive(Default)]
struct Items {
    roads: Option<Spanned<u32>>,
    signals: Option<Vec<Ident>>,
    conflicts: Option<Vec<ConflictDecl>>,
    phases: Vec<PhaseDecl>,
    program: Option<ProgramDecl>,
    emergencies: Vec<EmergencyDecl>,
    safe: Option<SafeDecl>,
    timing: Option<TimingDecl>,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    diagnostics: Vec<Diagnostic>,
    /// Phase names whose header parsed, even if the body did not. Keeps a
    /// broken phase from also producing "undefined phase" errors downstream.
    attempted_phases: HashSet<String>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if tok.kind != TokenKind::Eof {
            self.pos += 1;
        }
        tok
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Ident(s) if s == kw)
    }

    fn unexpected(&self, expected: &str) -> Diagnostic {
        let tok = self.peek();
        Diagnostic::error(tok.span, format!("expected {expected}, found {}", tok.kind))
    }

    fn keyword(&mut self, kw: &str) -> PResult<Span> {
        if self.at_keyword(kw) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&format!("'{kw}'")))
        }
    }

    fn punct(&mut self, kind: TokenKind) -> PResult<Span> {
        if self.peek().kind == kind {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&kind.to_string()))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<Ident> {
        match &self.peek().kind {
            TokenKind::Ident(s) => {
                let value = s.clone();
                let span = self.bump().span;
                Ok(Spanned::new(value, span))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn int(&mut self, what: &str) -> PResult<Spanned<u32>> {
        match self.peek().kind {
            TokenKind::Int(n) => {
                let span = self.bump().span;
                Ok(Spanned::new(n, span))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn recover(&mut self) {
        loop {
            match &self.peek().kind {
                TokenKind::Eof => return,
                TokenKind::Ident(s) if TOP_LEVEL.contains(&s.as_str()) => return,
                _ => {
                    self.bump();
                }
            }
        }
    }

    fn spec(&mut self) -> Option<JunctionSpec> {
        let header = (|| -> PResult<(Ident, Span)> {
            let kw = self.keyword("junction")?;
            let name = self.ident("junction name")?;
            self.punct(TokenKind::LBrace)?;
            Ok((name, kw))
        })();
        let (name, _) = match header {
            Ok(h) => h,
            Err(d) => {
                self.diagnostics.push(d);
                return None;
            }
        };

        let mut items = Items::default();
        loop {
            let tok = self.peek().clone();
            match &tok.kind {
                TokenKind::RBrace => {
                    self.bump();
                    if self.peek().kind != TokenKind::Eof {
                        let d = self.unexpected("end of input after junction body");
                        self.diagnostics.push(d);
                    }
                    break;
                }
                TokenKind::Eof => {
                    if !has_errors(&self.diagnostics) {
                        self.diagnostics.push(Diagnostic::error(
                            tok.span,
                            "expected '}' to close junction, found end of input",
                        ));
                    }
                    break;
                }
                TokenKind::Ident(kw) if TOP_LEVEL.contains(&kw.as_str()) => {
                    if let Err(d) = self.item(kw.clone(), tok.span, &mut items) {
                        self.diagnostics.push(d);
                        self.recover();
                    }
                }
                other => {
                    self.diagnostics.push(Diagnostic::error(
                        tok.span,
                        format!(
                            "expected a junction item ({}), found {other}",
                            TOP_LEVEL.join(", ")
                        ),
                    ));
                    self.bump();
                    self.recover();
                }
            }
        }

        self.assemble(name, items)
    }

    fn item(&mut self, kw: String, kw_span: Span, items: &mut Items) -> PResult<()> {
        self.bump();
        let duplicate = |what: &str| Diagnostic::error(kw_span, format!("duplicate definition of '{what}'"));
        match kw.as_str() {
            "roads" => {
                let n = self.int("road count")?;
                if items.roads.is_some() {
                    return Err(duplicate("roads"));
                }
                items.roads = Some(n);
            }
            "signals" => {
                let names = self.ident_list("signal name")?;
                if items.signals.is_some() {
                    return Err(duplicate("signals"));
                }
                items.signals = Some(names);
            }
            "conflicts" => {
                let pairs = self.conflicts()?;
                if items.conflicts.is_some() {
                    return Err(duplicate("conflicts"));
                }
                items.conflicts = Some(pairs);
            }
            "phase" => {
                let phase = self.phase()?;
                items.phases.push(phase);
            }
            "program" => {
                self.keyword("traditional")?;
                self.keyword("cycle")?;
                let cycle = self.ident_list("phase name")?;
                if items.program.is_some() {
                    return Err(duplicate("program"));
                }
                items.program = Some(ProgramDecl {
                    keyword: kw_span,
                    cycle,
                });
            }
            "emergency" => {
                self.keyword("road")?;
                let road = self.int("road number")?;
                self.keyword("hold")?;
                let hold = self.ident("phase name")?;
                self.keyword("min")?;
                let min_ticks = self.int("minimum hold ticks")?;
                items.emergencies.push(EmergencyDecl {
                    road,
                    hold,
                    min_ticks,
                });
            }
            "safe" => {
                let phase = self.ident("phase name")?;
                self.keyword("transition")?;
                let transition_ticks = self.int("transition ticks")?;
                if items.safe.is_some() {
                    return Err(duplicate("safe"));
                }
                items.safe = Some(SafeDecl {
                    phase,
                    transition_ticks,
                });
            }
            "timing" => {
                self.punct(TokenKind::LBrace)?;
                let mut entries = Vec::new();
                while self.peek().kind != TokenKind::RBrace {
                    let key = self.ident("timing key")?;
                    let value = self.int("tick count")?;
                    self.punct(TokenKind::Semi)?;
                    entries.push((key, value));
                }
                self.bump();
                if items.timing.is_some() {
                    return Err(duplicate("timing"));
                }
                items.timing = Some(TimingDecl { entries });
            }
            _ => unreachable!("not a top-level keyword: {kw}"),
        }
        Ok(())
    }

    fn ident_list(&mut self, what: &str) -> PResult<Vec<Ident>> {
        self.punct(TokenKind::LBracket)?;
        let mut out = vec![self.ident(what)?];
        while self.peek().kind == TokenKind::Comma {
            self.bump();
            out.push(self.ident(what)?);
        }
        self.punct(TokenKind::RBracket)?;
        Ok(out)
    }

    fn movement(&mut self) -> PResult<MovementRef> {
        self.keyword("road")?;
        let road = self.int("road number")?;
        self.punct(TokenKind::Dot)?;
        let kind_tok = self.ident("movement kind (straight, right, left, zebra)")?;
        let kind = MovementKind::from_keyword(&kind_tok.value).ok_or_else(|| {
            Diagnostic::error(
                kind_tok.span,
                format!(
                    "unknown movement kind '{}', expected straight, right, left or zebra",
                    kind_tok.value
                ),
            )
        })?;
        Ok(MovementRef {
            road,
            kind: Spanned::new(kind, kind_tok.span),
        })
    }

    fn conflicts(&mut self) -> PResult<Vec<ConflictDecl>> {
        self.punct(TokenKind::LBrace)?;
        let mut pairs = Vec::new();
        while self.peek().kind != TokenKind::RBrace {
            let first = self.movement()?;
            self.keyword("x")?;
            let second = self.movement()?;
            self.punct(TokenKind::Semi)?;
            pairs.push(ConflictDecl { first, second });
        }
        self.bump();
        Ok(pairs)
    }

    fn phase(&mut self) -> PResult<PhaseDecl> {
        let name = self.ident("phase name")?;
        self.attempted_phases.insert(name.value.clone());
        self.keyword("duration")?;
        let duration = self.int("duration in ticks")?;
        self.punct(TokenKind::LBrace)?;
        let mut roads = Vec::new();
        loop {
            roads.push(self.road_lights()?);
            if self.peek().kind == TokenKind::RBrace {
                self.bump();
                break;
            }
        }
        Ok(PhaseDecl {
            name,
            duration,
            roads,
        })
    }

    fn road_lights(&mut self) -> PResult<RoadLightsDecl> {
        self.keyword("road")?;
        let road = self.int("road number")?;
        self.punct(TokenKind::Colon)?;
        self.punct(TokenKind::LBracket)?;
        let mut lit = Vec::new();
        if self.peek().kind != TokenKind::RBracket {
            lit.push(self.ident("signal name")?);
            while self.peek().kind == TokenKind::Comma {
                self.bump();
                lit.push(self.ident("signal name")?);
            }
        }
        self.punct(TokenKind::RBracket)?;
        self.punct(TokenKind::Semi)?;
        Ok(RoadLightsDecl { road, lit })
    }

    /// Checks required items and name references once the whole body has
    /// been read.
    fn assemble(&mut self, name: Ident, items: Items) -> Option<JunctionSpec> {
        let anchor = name.span;
        let syntax_failed = has_errors(&self.diagnostics);
        let mut missing = |what: &str| {
            self.diagnostics.push(Diagnostic::error(
                anchor,
                format!("junction '{}' is missing a '{what}' declaration", name.value),
            ));
        };
        // A missing item is only worth reporting if it was not lost to a
        // syntax error we already reported.
        if !syntax_failed {
            if items.roads.is_none() {
                missing("roads");
            }
            if items.signals.is_none() {
                missing("signals");
            }
            if items.phases.is_empty() {
                missing("phase");
            }
            if items.program.is_none() {
                missing("program");
            }
            if items.safe.is_none() {
                missing("safe");
            }
        }

        let mut defined: HashMap<&str, Span> = HashMap::new();
        for phase in &items.phases {
            if let Some(first) = defined.get(phase.name.value.as_str()) {
                self.diagnostics.push(Diagnostic::error(
                    phase.name.span,
                    format!(
                        "duplicate definition of phase '{}' (first defined at {first})",
                        phase.name.value
                    ),
                ));
            } else {
                defined.insert(&phase.name.value, phase.name.span);
            }
        }

        let check_ref = |ident: &Ident, diagnostics: &mut Vec<Diagnostic>| {
            if !defined.contains_key(ident.value.as_str()) && !self.attempted_phases.contains(&ident.value) {
                diagnostics.push(Diagnostic::error(
                    ident.span,
                    format!("undefined phase '{}'", ident.value),
                ));
            }
        };
        let mut diagnostics = Vec::new();
        if let Some(program) = &items.program {
            for ident in &program.cycle {
                check_ref(ident, &mut diagnostics);
            }
        }
        for emergency in &items.emergencies {
            check_ref(&emergency.hold, &mut diagnostics);
        }
        if let Some(safe) = &items.safe {
            check_ref(&safe.phase, &mut diagnostics);
        }

        let mut seen_roads: HashMap<u32, Span> = HashMap::new();
        for emergency in &items.emergencies {
            if let Some(first) = seen_roads.insert(emergency.road.value, emergency.road.span) {
                diagnostics.push(Diagnostic::error(
                    emergency.road.span,
                    format!(
                        "duplicate definition of emergency for road {} (first defined at {first})",
                        emergency.road.value
                    ),
                ));
            }
        }
        self.diagnostics.append(&mut diagnostics);

        if has_errors(&self.diagnostics) {
            return None;
        }
        Some(JunctionSpec {
            name,
            road_count: items.roads?,
            signal_names: items.signals?,
            conflicts: items.conflicts,
            phases: items.phases,
            traditional: items.program?,
            emergencies: items.emergencies,
            safe: items.safe?,
            timing: items.timing,
        })
    }
}
