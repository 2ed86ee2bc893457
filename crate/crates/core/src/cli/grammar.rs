//! Small text grammar for maps, closed 1-forms and arcs used by configs and flags.
//!
//! A map is `term (" o " term)*`, composed right to left. A term is `name` or
//! `name:key=value,key=value`. Expression values are either names from `[fields]` or inline
//! expressions (the expression grammar has no commas).
//!
//! | term        | keys                                              |
//! |-------------|---------------------------------------------------|
//! | `id`        |                                                   |
//! | `shear`     | `t`, `b` (profile in `y`, default `bump(y)`)      |
//! | `twist`     | `cx`, `cy`, `ax`, `ay`, `a` (1), `t` (1)          |
//! | `flow`      | `H`, `t` (1), `steps`                             |
//! | `extension` | `xi` (in `theta`, `t`), `t` (1), `steps`          |
//!
//! Forms: `dx`, `dual:<i>` (Poincaré dual of cut arc `i`), `form:p=EXPR,q=EXPR` (even).
//! Arcs: `cut:<i>`, `vertical:x=X[,orientation=±1]`, `graph:x=X,c=EXPR[,orientation=±1]`.

use std::collections::BTreeMap;

use crate::fieldexpr::{parse_with, Expr, Var};
use crate::flow::{
    boundary_extension, default_steps, flow_map, hamiltonian_field, shear_profile, EllipticTwist, FlowDiffeo,
};
use crate::quadrature::QuadratureSpec;
use crate::surface::{poincare_dual, ArcData, FormField, Parity, QuotientSurface};

/// Everything a spec string may refer to.
#[derive(Debug, Clone)]
pub struct Context {
    pub surface: QuotientSurface,
    pub fields: BTreeMap<String, Expr>,
    /// RK4 steps per unit time for flows and extensions; `None` keeps the crate default.
    pub steps: Option<usize>,
    pub collar_depth: Option<f64>,
    pub epsilon: f64,
}

/// A built map with whatever closed form it has.
#[derive(Debug, Clone)]
pub struct BuiltMap {
    pub map: FlowDiffeo,
    pub closed: ClosedForm,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClosedForm {
    Identity,
    Shear { t: f64, profile: Expr },
    Twist(EllipticTwist),
    None,
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    name: String,
    params: Vec<(String, String)>,
}

fn term(src: &str) -> Result<Term, String> {
    let src = src.trim();
    let (name, rest) = match src.split_once(':') {
        Some((n, r)) => (n.trim(), Some(r)),
        None => (src, None),
    };
    if name.is_empty() {
        return Err(format!("empty term in `{src}`"));
    }
    let mut params = Vec::new();
    if let Some(rest) = rest {
        for part in rest.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("`{}` in `{src}` is not key=value", part.trim()))?;
            let k = k.trim().to_string();
            if params.iter().any(|(p, _)| *p == k) {
                return Err(format!("key `{k}` repeated in `{src}`"));
            }
            params.push((k, v.trim().to_string()));
        }
    }
    Ok(Term { name: name.to_string(), params })
}

impl Term {
    fn check_keys(&self, allowed: &[&str]) -> Result<(), String> {
        match self.params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            Some((k, _)) => Err(format!("`{}` takes keys {allowed:?}, not `{k}`", self.name)),
            None => Ok(()),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn num(&self, key: &str, default: Option<f64>) -> Result<f64, String> {
        match self.raw(key) {
            Some(v) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("`{}`: {key} = `{v}` is not a number", self.name)),
            None => default.ok_or_else(|| format!("`{}` needs `{key}`", self.name)),
        }
    }

    fn count(&self, key: &str) -> Result<Option<usize>, String> {
        self.raw(key)
            .map(|v| v.parse::<usize>().map_err(|_| format!("`{}`: {key} = `{v}` is not a count", self.name)))
            .transpose()
    }

    fn expr(&self, key: &str, ctx: &Context) -> Result<Option<Expr>, String> {
        self.raw(key).map(|v| resolve(v, ctx)).transpose()
    }
}

/// A field name or an inline expression.
pub fn resolve(v: &str, ctx: &Context) -> Result<Expr, String> {
    if let Some(e) = ctx.fields.get(v) {
        return Ok(e.clone());
    }
    parse_with(v, &Var::ALL).map_err(|e| format!("`{v}` is neither a field name nor an expression: {e}"))
}

pub fn build_map(src: &str, ctx: &Context) -> Result<BuiltMap, String> {
    let terms: Vec<&str> = src.split(" o ").collect();
    let mut built: Option<BuiltMap> = None;
    for t in terms.iter().rev() {
        let b = build_term(&term(t)?, ctx)?;
        built = Some(match built {
            None => b,
            Some(inner) => BuiltMap { map: b.map.compose(&inner.map), closed: ClosedForm::None },
        });
    }
    built.ok_or_else(|| "empty map".to_string())
}

fn build_term(t: &Term, ctx: &Context) -> Result<BuiltMap, String> {
    let s = ctx.surface;
    let err = |e: crate::flow::FlowError| format!("`{}`: {e}", t.name);
    let steps = |t: &Term, span: f64| -> Result<usize, String> {
        Ok(match (t.count("steps")?, ctx.steps) {
            (Some(n), _) => n,
            (None, Some(per_unit)) => ((span.abs() * per_unit as f64).ceil() as usize).max(1),
            (None, None) => default_steps(span),
        })
    };
    match t.name.as_str() {
        "id" => {
            t.check_keys(&[])?;
            Ok(BuiltMap { map: FlowDiffeo::identity(s), closed: ClosedForm::Identity })
        }
        "shear" => {
            t.check_keys(&["t", "b"])?;
            let time = t.num("t", None)?;
            let profile = t.expr("b", ctx)?.unwrap_or_else(shear_profile);
            let map = FlowDiffeo::shear(s, time, profile.clone()).map_err(err)?;
            Ok(BuiltMap { map, closed: ClosedForm::Shear { t: time, profile } })
        }
        "twist" => {
            t.check_keys(&["cx", "cy", "ax", "ay", "a", "t"])?;
            let tw = EllipticTwist {
                center: [t.num("cx", None)?, t.num("cy", None)?],
                axes: [t.num("ax", None)?, t.num("ay", None)?],
                amplitude: t.num("a", Some(1.0))?,
                time: t.num("t", Some(1.0))?,
            };
            let map = FlowDiffeo::twist(s, tw).map_err(err)?;
            Ok(BuiltMap { map, closed: ClosedForm::Twist(tw) })
        }
        "flow" => {
            t.check_keys(&["H", "t", "steps"])?;
            let h = t.expr("H", ctx)?.ok_or("`flow` needs `H`")?;
            let time = t.num("t", Some(1.0))?;
            let field = hamiltonian_field(s, &h, None).map_err(err)?;
            let map = flow_map(&field, time, steps(t, time)?).map_err(err)?;
            Ok(BuiltMap { map, closed: ClosedForm::None })
        }
        "extension" => {
            t.check_keys(&["xi", "t", "steps"])?;
            let xi = t.expr("xi", ctx)?.ok_or("`extension` needs `xi`")?;
            let time = t.num("t", Some(1.0))?;
            let field = boundary_extension(s, &xi, ctx.collar_depth, None).map_err(err)?;
            let map = flow_map(&field, time, steps(t, time)?).map_err(err)?;
            Ok(BuiltMap { map, closed: ClosedForm::None })
        }
        other => Err(format!("unknown map `{other}` (id, shear, twist, flow, extension)")),
    }
}

/// The arcs of the cut system with the context's tube width.
pub fn cut_arcs(ctx: &Context) -> Vec<ArcData> {
    crate::surface::cut_system(&ctx.surface)
        .into_iter()
        .map(|a| ArcData { epsilon: ctx.epsilon, ..a })
        .collect()
}

pub fn build_arc(src: &str, ctx: &Context) -> Result<ArcData, String> {
    let trimmed = src.trim();
    if trimmed == "cut" || trimmed.starts_with("cut:") {
        return cut_index(src, &cut_arcs(ctx), 0);
    }
    let t = term(src)?;
    let orientation = |t: &Term| -> Result<f64, String> {
        let o = t.num("orientation", Some(1.0))?;
        if o.abs() != 1.0 {
            return Err(format!("orientation must be 1 or -1, got {o}"));
        }
        Ok(o)
    };
    let arc = match t.name.as_str() {
        "vertical" => {
            t.check_keys(&["x", "orientation"])?;
            ArcData::vertical(t.num("x", None)?, orientation(&t)?, ctx.epsilon)
        }
        "graph" => {
            t.check_keys(&["x", "c", "orientation"])?;
            let c = t.expr("c", ctx)?.ok_or("`graph` needs `c`")?;
            ArcData::graph(t.num("x", None)?, c, orientation(&t)?, ctx.epsilon)
        }
        other => return Err(format!("unknown arc `{other}` (cut, vertical, graph)")),
    };
    arc.validate(&ctx.surface).map_err(|e| format!("arc `{src}`: {e}"))?;
    Ok(arc)
}

// `cut:<i>` carries a bare index, which the key=value splitter does not accept
fn cut_index(src: &str, arcs: &[ArcData], default: usize) -> Result<ArcData, String> {
    let i = match src.trim().split_once(':') {
        Some((_, i)) => i.trim().parse::<usize>().map_err(|_| format!("`{src}`: bad arc index"))?,
        None => default,
    };
    arcs.get(i).cloned().ok_or_else(|| format!("`{src}`: the cut system has {} arcs", arcs.len()))
}

pub fn build_form(src: &str, ctx: &Context, spec: &QuadratureSpec) -> Result<FormField, String> {
    let s = ctx.surface;
    let src = src.trim();
    if src == "dx" {
        return FormField::one_form(s, Parity::Even, Expr::num(1.0), Expr::num(0.0)).map_err(|e| e.to_string());
    }
    if src == "dual" || src.starts_with("dual:") {
        let arc = cut_index(src, &cut_arcs(ctx), 0)?;
        return poincare_dual(&s, &arc, spec).map(|d| d.form).map_err(|e| e.to_string());
    }
    let t = term(src)?;
    if t.name != "form" {
        return Err(format!("unknown form `{src}` (dx, dual:<i>, form:p=..,q=..)"));
    }
    t.check_keys(&["p", "q"])?;
    let p = t.expr("p", ctx)?.unwrap_or(Expr::num(0.0));
    let q = t.expr("q", ctx)?.unwrap_or(Expr::num(0.0));
    let f = FormField::one_form(s, Parity::Even, p, q).map_err(|e| format!("`{src}`: {e}"))?;
    f.check_closed(1e-8).map_err(|e| format!("`{src}`: {e}"))?;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldexpr::parse;
    use crate::surface::SurfaceMap;

    fn ctx() -> Context {
        let mut fields = BTreeMap::new();
        fields.insert("xi".to_string(), parse("0.1*sin(2*pi*theta)").unwrap());
        Context { surface: QuotientSurface::mobius(), fields, steps: Some(32), collar_depth: None, epsilon: 0.125 }
    }

    #[test]
    fn terms_split() {
        let t = term("twist: cx=0.5, cy=0,ax=0.2").unwrap();
        assert_eq!(t.name, "twist");
        assert_eq!(t.params[0], ("cx".to_string(), "0.5".to_string()));
        assert!(term("shear:t").is_err());
        assert!(term("shear:t=1,t=2").is_err());
    }

    #[test]
    fn maps_build() {
        let c = ctx();
        let m = build_map("shear:t=1", &c).unwrap();
        assert!(matches!(m.closed, ClosedForm::Shear { t, .. } if t == 1.0));
        let tw = build_map("twist:cx=0.5,cy=0,ax=0.2,ay=0.15,a=0.01", &c).unwrap();
        assert!(matches!(tw.closed, ClosedForm::Twist(_)));
        let comp = build_map("shear:t=1 o extension:xi=xi", &c).unwrap();
        assert_eq!(comp.closed, ClosedForm::None);
        let p = [0.3, 0.4];
        let a = build_map("shear:t=1", &c).unwrap().map.apply(build_map("extension:xi=xi", &c).unwrap().map.apply(p));
        assert_eq!(comp.map.apply(p), a);
        assert!(build_map("extension:xi=0.1*sin(2*pi*theta),t=0.5", &c).is_ok());
    }

    #[test]
    fn map_errors_name_the_problem() {
        let c = ctx();
        for (src, needle) in [
            ("spin:t=1", "unknown map"),
            ("shear:t=x", "not a number"),
            ("shear:s=1", "takes keys"),
            ("twist:cx=0.5", "needs `cy`"),
            ("flow:t=1", "needs `H`"),
            ("extension:xi=nofield(", "neither a field name"),
        ] {
            let e = build_map(src, &c).unwrap_err();
            assert!(e.contains(needle), "{src}: {e}");
        }
    }

    #[test]
    fn forms_and_arcs() {
        let c = ctx();
        let spec = QuadratureSpec::new(8, 16, 16).unwrap();
        assert!(build_form("dx", &c, &spec).is_ok());
        assert!(build_form("dual:0", &c, &spec).is_ok());
        assert!(build_form("dual:3", &c, &spec).is_err());
        assert!(build_form("form:p=1 + pi*y*cos(pi*x),q=sin(pi*x)", &c, &spec).is_ok());
        // not closed
        assert!(build_form("form:p=y*cos(pi*x),q=0", &c, &spec).is_err());
        assert_eq!(build_arc("cut:0", &c).unwrap().x0, 0.5);
        assert_eq!(build_arc("vertical:x=0.25,orientation=-1", &c).unwrap().orientation, -1.0);
        assert!(build_arc("vertical:x=0.25,orientation=2", &c).is_err());
        assert!(build_arc("graph:x=0.5,c=0.1*bump(2*y)", &c).is_ok());
    }
}
