//! Canonical text form of a [`Query`]; `parse_query(&print_query(q)) == q`.

use super::ast::*;

pub fn print_query(q: &Query) -> String {
    let mut out = String::new();
    if let Some(select) = &q.select {
        out.push_str("SELECT ");
        match select {
            SelectList::Star => out.push('*'),
            SelectList::Columns(cols) => {
                out.push_str(&cols.iter().map(column).collect::<Vec<_>>().join(", "))
            }
        }
        if let Some(from) = &q.from {
            out.push_str(" FROM ");
            out.push_str(&from.table.name);
            if let Some(a) = &from.alias {
                out.push(' ');
                out.push_str(&a.name);
            }
        }
        if !q.where_clause.is_empty() {
            out.push_str(" WHERE ");
            let conds: Vec<String> = q
                .where_clause
                .iter()
                .map(|c| format!("{} {} {}", column(&c.column), c.op.symbol(), literal(&c.value)))
                .collect();
            out.push_str(&conds.join(" AND "));
        }
        out.push(' ');
    }
    out.push_str("COMPARE ");
    match &q.compare.form {
        CompareForm::Shared { left, right, gms } => {
            out.push_str(&format!("[{} <-> {}] [{}]", cset(left), cset(right), gm_list(gms)));
        }
        CompareForm::PerSide {
            left,
            left_gms,
            right,
            right_gms,
        } => {
            out.push_str(&format!(
                "[{}][{}] <-> [{}][{}]",
                cset(left),
                gm_list(left_gms),
                cset(right),
                gm_list(right_gms)
            ));
        }
    }
    let s = &q.compare.scorer;
    out.push_str(&format!(" USING {} OVER DIFF({})", s.agg.name(), s.p));
    if let Some(a) = &s.alias {
        out.push_str(&format!(" AS {}", a.name));
    }
    if let Some(o) = &q.order_by {
        out.push_str(&format!(" ORDER BY {}", column(&o.column)));
        if let Some(d) = o.direction {
            out.push(' ');
            out.push_str(d.name());
        }
    }
    if let Some(l) = &q.limit {
        out.push_str(&format!(" LIMIT {}", l.count));
    }
    out
}

fn column(c: &ColumnRef) -> String {
    match &c.qualifier {
        Some(q) => format!("{}.{}", q.name, c.column.name),
        None => c.column.name.clone(),
    }
}

fn literal(l: &Literal) -> String {
    match l {
        Literal::Int(i) => i.to_string(),
        Literal::Float(f) => format!("{f:?}"),
        Literal::Str(s) => format!("'{}'", s.replace('\'', "''")),
        Literal::Word(w) => w.clone(),
    }
}

fn alias(a: &Option<Ident>) -> String {
    a.as_ref().map_or(String::new(), |a| format!(" AS {}", a.name))
}

fn cset(c: &ConstraintSet) -> String {
    let items: Vec<String> = c
        .items
        .iter()
        .map(|i| match i {
            ConstraintItem::Fixed {
                column: c,
                value,
                alias: a,
            } => format!("({} = {}){}", column(c), literal(value), alias(a)),
            ConstraintItem::All { column: c, alias: a } => format!("({}){}", column(c), alias(a)),
            ConstraintItem::Bare(id) => id.name.clone(),
        })
        .collect();
    format!("({})", items.join(", "))
}

fn gm_list(gms: &[GmItem]) -> String {
    gms.iter()
        .map(|g| {
            let grouping = match &g.grouping {
                GroupingItem::Column { column: c, alias: a } => format!("({}){}", column(c), alias(a)),
                GroupingItem::Bare(id) => id.name.clone(),
            };
            let measure = match &g.measure {
                MeasureItem::Agg {
                    agg,
                    column: c,
                    alias: a,
                } => format!("{}({}){}", agg.name(), column(c), alias(a)),
                MeasureItem::Ref(id) => id.name.clone(),
            };
            format!("({grouping}, {measure})")
        })
        .collect::<Vec<_>>()
        .join(", ")
}
