//! Source templates. Each class or name has several algorithmic variants;
//! every instantiation also draws fresh identifiers, statement orders,
//! loop styles and optional dead or loop-invariant statements.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::rng::Rng as Chacha;

const ARRAYS: &[&str] = &["a", "arr", "xs", "data", "vals", "nums", "buf", "items"];
const INDICES: &[&str] = &["i", "j", "k", "p", "q", "u", "w", "idx", "pos", "t1", "t2"];
const SCALARS: &[&str] = &["s", "c", "m", "r", "acc", "res", "total", "cnt", "best", "tmp", "h", "z", "e", "lim", "g", "y", "x2"];

pub(crate) struct Ctx<'r> {
    rng: &'r mut Chacha,
    used: Vec<String>,
}

impl<'r> Ctx<'r> {
    pub(crate) fn new(rng: &'r mut Chacha) -> Ctx<'r> {
        Ctx { rng, used: Vec::new() }
    }

    fn fresh(&mut self, pool: &[&str]) -> String {
        loop {
            let base = pool.choose(self.rng).expect("non-empty pool");
            let name = if self.rng.gen_bool(0.8) { base.to_string() } else { format!("{base}{}", self.rng.gen_range(0..10)) };
            if !self.used.contains(&name) {
                self.used.push(name.clone());
                return name;
            }
        }
    }

    fn arr(&mut self) -> String {
        self.fresh(ARRAYS)
    }

    fn idx(&mut self) -> String {
        self.fresh(INDICES)
    }

    fn var(&mut self) -> String {
        self.fresh(SCALARS)
    }

    fn coin(&mut self) -> bool {
        self.rng.gen_bool(0.5)
    }

    fn pick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs.choose(self.rng).expect("non-empty choice")
    }

    fn int(&mut self, lo: i64, hi: i64) -> i64 {
        self.rng.gen_range(lo..=hi)
    }

    /// Optional statement assigning a never-read variable. `reads` are
    /// int-valued expressions it may use.
    fn dead(&mut self, reads: &[&str]) -> String {
        if self.rng.gen_bool(0.6) {
            return String::new();
        }
        let v = self.var();
        let k = self.int(0, 9);
        match (self.int(0, 2), reads.choose(self.rng)) {
            (0, Some(r)) => format!("{v} = {r} + {k};"),
            (1, Some(r)) => format!("{v} = {r} * 2;"),
            _ => format!("{v} = {k};"),
        }
    }

    /// Length of `a`: either inline or through a variable assigned first.
    fn len_of(&mut self, a: &str) -> (String, String) {
        if self.coin() {
            let n = self.var();
            (format!("{n} = len({a});"), n)
        } else {
            (String::new(), format!("len({a})"))
        }
    }

    /// The literal 1, sometimes through a constant variable.
    fn one(&mut self) -> (String, String) {
        if self.rng.gen_bool(0.3) {
            let v = self.var();
            (format!("{v} = 1;"), v)
        } else {
            (String::new(), "1".into())
        }
    }

    fn incr(&mut self, v: &str, by: &str) -> String {
        match self.int(0, 2) {
            0 => format!("{v} = {v} + {by};"),
            1 => format!("{v} += {by};"),
            _ => format!("{v} = {by} + {v};"),
        }
    }

    fn decr(&mut self, v: &str, by: &str) -> String {
        if self.coin() {
            format!("{v} = {v} - {by};")
        } else {
            format!("{v} -= {by};")
        }
    }

    fn swap(&mut self, a: &str, x: &str, y: &str) -> String {
        if self.coin() {
            format!("swap({a}, {x}, {y});")
        } else {
            let t = self.var();
            format!("{t} = {a}[{x}]; {a}[{x}] = {a}[{y}]; {a}[{y}] = {t};")
        }
    }

    /// Independent statements in random order.
    fn shuffled(&mut self, mut xs: Vec<String>) -> String {
        xs.shuffle(self.rng);
        xs.join(" ")
    }

    /// Loop over `0..n` with index `i`, as a `for` or a `while`.
    fn count_up(&mut self, i: &str, start: &str, n: &str, body: &str) -> String {
        if self.coin() {
            format!("for {i} in {start}..{n} {{ {body} }}")
        } else {
            let inc = self.incr(i, "1");
            format!("{i} = {start}; while {i} < {n} {{ {body} {inc} }}")
        }
    }

    /// Visits every index of `a` exactly once, forwards or backwards.
    fn each_index(&mut self, i: &str, n: &str, body: &str) -> String {
        match self.int(0, 2) {
            0 => self.count_up(i, "0", n, body),
            1 => format!("for {i} in {n} - 1..-1 step -1 {{ {body} }}"),
            _ => {
                let dec = self.decr(i, "1");
                format!("{i} = {n} - 1; while {i} >= 0 {{ {body} {dec} }}")
            }
        }
    }
}

fn func(params: &str, body: &str) -> String {
    format!("fn f({params}) {{ {body} }}")
}

fn arr_fn(a: &str, body: &str) -> String {
    func(&format!("{a}: int[]"), body)
}

/// Bubble sort passes; `gt(x, y)` decides when neighbours swap.
fn bubble(c: &mut Ctx, a: &str, gt: &dyn Fn(&mut Ctx, String, String) -> String) -> String {
    let (pre_n, n) = c.len_of(a);
    let (pre_one, one) = c.one();
    let dead = c.dead(&[&format!("len({a})")]);
    let (i, j) = (c.idx(), c.idx());
    let cond = gt(c, format!("{a}[{j}]"), format!("{a}[{j} + {one}]"));
    let sw = c.swap(a, &j, &format!("{j} + {one}"));
    let inner_if = format!("if {cond} {{ {sw} }}");
    let body = match c.int(0, 3) {
        0 => {
            let bound = c.pick(&["{n} - {i} - 1", "{n} - 1 - {i}", "{n} - 1"]).replace("{n}", &n).replace("{i}", &i);
            let inner = c.count_up(&j, "0", &bound, &inner_if);
            c.count_up(&i, "0", &n, &inner)
        }
        1 => {
            // loop-invariant bound recomputed each outer pass
            let lim = c.var();
            let inner = c.count_up(&j, "0", &format!("{lim} - {i}"), &inner_if);
            let outer = format!("{lim} = {n} - 1; {inner}");
            c.count_up(&i, "0", &n, &outer)
        }
        2 => {
            let flag = c.var();
            let sw2 = format!("{sw} {flag} = true;");
            let inner = c.count_up(&j, "0", &format!("{n} - 1"), &format!("if {cond} {{ {sw2} }}"));
            format!("{flag} = true; while {flag} {{ {flag} = false; {inner} }}")
        }
        _ => {
            // the inner pass walks down from the end
            let hi = format!("{n} - 1");
            let cond2 = gt(c, format!("{a}[{j} - {one}]"), format!("{a}[{j}]"));
            let sw2 = c.swap(a, &format!("{j} - {one}"), &j);
            let inner = format!("for {j} in {hi}..{i} step -1 {{ if {cond2} {{ {sw2} }} }}");
            c.count_up(&i, "0", &n, &inner)
        }
    };
    let pre = c.shuffled(vec![pre_n, pre_one]);
    arr_fn(a, &format!("{pre} {dead} {body}"))
}

fn selection(c: &mut Ctx, a: &str, better: &str) -> String {
    let (pre_n, n) = c.len_of(a);
    let dead = c.dead(&[&format!("len({a})")]);
    let (i, j, m) = (c.idx(), c.idx(), c.var());
    let sw = c.swap(a, &i, &m);
    let inner = c.count_up(&j, &format!("{i} + 1"), &n, &format!("if {a}[{j}] {better} {a}[{m}] {{ {m} = {j}; }}"));
    let outer = c.count_up(&i, "0", &n, &format!("{m} = {i}; {inner} {sw}"));
    arr_fn(a, &format!("{pre_n} {dead} {outer}"))
}

fn insertion(c: &mut Ctx, a: &str, before: &str) -> String {
    let (pre_n, n) = c.len_of(a);
    let dead = c.dead(&[&format!("len({a})")]);
    let (i, j, key) = (c.idx(), c.idx(), c.var());
    let dec = c.decr(&j, "1");
    let body = format!("{key} = {a}[{i}]; {j} = {i} - 1; while {j} >= 0 && {key} {before} {a}[{j}] {{ {a}[{j} + 1] = {a}[{j}]; {dec} }} {a}[{j} + 1] = {key};");
    let outer = c.count_up(&i, "1", &n, &body);
    arr_fn(a, &format!("{pre_n} {dead} {outer}"))
}

fn reverse(c: &mut Ctx) -> String {
    let a = c.arr();
    let (pre_n, n) = c.len_of(&a);
    let dead = c.dead(&[&format!("len({a})")]);
    let (i, j) = (c.idx(), c.idx());
    let body = match c.int(0, 2) {
        0 => {
            let sw = c.swap(&a, &i, &format!("{n} - 1 - {i}"));
            c.count_up(&i, "0", &format!("{n} / 2"), &sw)
        }
        1 => {
            let sw = c.swap(&a, &i, &j);
            let (inc, dec) = (c.incr(&i, "1"), c.decr(&j, "1"));
            let init = c.shuffled(vec![format!("{i} = 0;"), format!("{j} = {n} - 1;")]);
            format!("{init} while {i} < {j} {{ {sw} {inc} {dec} }}")
        }
        _ => {
            // copy out, then write back in reverse
            let b = c.arr();
            let fill = c.count_up(&i, "0", &n, &format!("{b}[{i}] = {a}[{n} - 1 - {i}];"));
            let back = c.count_up(&j, "0", &n, &format!("{a}[{j}] = {b}[{j}];"));
            format!("{b} = zeros({n}); {fill} {back}")
        }
    };
    arr_fn(&a, &format!("{pre_n} {dead} {body}"))
}

/// Sum of all elements, optionally scaled inside the loop by a constant.
fn sum(c: &mut Ctx) -> String {
    let a = c.arr();
    let (pre_n, n) = c.len_of(&a);
    let dead = c.dead(&[&format!("len({a})")]);
    let (i, s) = (c.idx(), c.var());
    let add = c.incr(&s, &format!("{a}[{i}]"));
    let body = if c.rng.gen_bool(0.3) {
        let w = c.var();
        format!("{w} = {n}; {add}")
    } else {
        add
    };
    let lp = c.each_index(&i, &n, &body);
    let init = c.shuffled(vec![format!("{s} = 0;"), pre_n]);
    arr_fn(&a, &format!("{init} {dead} {lp} return {s};"))
}

/// Counts elements satisfying `cond` (a template over the element).
fn count_where(c: &mut Ctx, conds: &[&str]) -> String {
    let a = c.arr();
    let (pre_n, n) = c.len_of(&a);
    let (pre_one, one) = c.one();
    let dead = c.dead(&[&format!("len({a})")]);
    let (i, cnt) = (c.idx(), c.var());
    let cond = c.pick(conds).replace("X", &format!("{a}[{i}]"));
    let inc = c.incr(&cnt, &one);
    let body = if c.rng.gen_bool(0.25) {
        let neg = c.pick(&["!({cond})"]).replace("{cond}", &cond);
        format!("if {neg} {{ }} else {{ {inc} }}")
    } else {
        format!("if {cond} {{ {inc} }}")
    };
    let lp = c.each_index(&i, &n, &body);
    let init = c.shuffled(vec![format!("{cnt} = 0;"), pre_n, pre_one]);
    arr_fn(&a, &format!("{init} {dead} {lp} return {cnt};"))
}

pub(crate) const CLASSES: [&str; 6] = ["bubble_sort", "descending_sort", "reverse_array", "array_sum", "count_positive", "count_nonnegative"];

fn asc(_: &mut Ctx, x: String, y: String) -> String {
    format!("{x} > {y}")
}

fn gen_class(c: &mut Ctx, class: &str) -> String {
    match class {
        "bubble_sort" => {
            let a = c.arr();
            if c.coin() {
                bubble(c, &a, &asc)
            } else {
                bubble(c, &a, &|c: &mut Ctx, x, y| if c.coin() { format!("{x} > {y}") } else { format!("{y} < {x}") })
            }
        }
        "descending_sort" => {
            let a = c.arr();
            match c.int(0, 2) {
                0 => bubble(c, &a, &|c: &mut Ctx, x, y| if c.coin() { format!("{x} < {y}") } else { format!("{y} > {x}") }),
                1 => selection(c, &a, ">"),
                _ => insertion(c, &a, ">"),
            }
        }
        "reverse_array" => reverse(c),
        "array_sum" => sum(c),
        "count_positive" => count_where(c, &["X > 0", "0 < X"]),
        "count_nonnegative" => count_where(c, &["X >= 0", "0 <= X"]),
        other => unreachable!("unknown class {other}"),
    }
}

/// One source for classification class `label`.
pub(crate) fn classification_source(rng: &mut Chacha, label: &str) -> String {
    gen_class(&mut Ctx::new(rng), label)
}

pub(crate) const NAMES: [&str; 12] = [
    "reverse_array",
    "sum_array",
    "find_max",
    "find_min",
    "count_positive",
    "count_negative",
    "sort_array",
    "sort_array_descending",
    "find_max_diff",
    "contains_value",
    "index_of_value",
    "sum_two_numbers",
];

/// A sign written as `k - m`, positive when `up`. Only evaluation reveals
/// which way a comparison built on it points.
fn sign(c: &mut Ctx, up: bool) -> String {
    let k = c.int(1, 9);
    let m = c.int(0, k - 1);
    if up {
        format!("{k} - {m}")
    } else {
        format!("{m} - {k}")
    }
}

/// Running extreme of `a`; `up` keeps the maximum.
fn extreme(c: &mut Ctx, up: bool) -> String {
    let a = c.arr();
    let (pre_n, n) = c.len_of(&a);
    let dead = c.dead(&[&format!("len({a})")]);
    let (i, m) = (c.idx(), c.var());
    let body = if c.coin() {
        let op = if up { ">" } else { "<" };
        let body = format!("if {a}[{i}] {op} {m} {{ {m} = {a}[{i}]; }}");
        c.count_up(&i, "1", &n, &body)
    } else {
        let d = c.var();
        let sg = sign(c, up);
        let body = format!("if ({a}[{i}] - {m}) * {d} > 0 {{ {m} = {a}[{i}]; }}");
        let lp = c.count_up(&i, "1", &n, &body);
        format!("{d} = {sg}; {lp}")
    };
    arr_fn(&a, &format!("{pre_n} {m} = {a}[0]; {dead} {body} return {m};"))
}

fn signed_count(c: &mut Ctx, up: bool) -> String {
    if c.coin() {
        let conds: &[&str] = if up { &["X > 0", "0 < X", "X >= 1"] } else { &["X < 0", "0 > X", "X <= -1"] };
        return count_where(c, conds);
    }
    let a = c.arr();
    let (pre_n, n) = c.len_of(&a);
    let dead = c.dead(&[&format!("len({a})")]);
    let (i, cnt, d) = (c.idx(), c.var(), c.var());
    let sg = sign(c, up);
    let inc = c.incr(&cnt, "1");
    let lp = c.each_index(&i, &n, &format!("if {a}[{i}] * {d} > 0 {{ {inc} }}"));
    let init = c.shuffled(vec![format!("{cnt} = 0;"), format!("{d} = {sg};"), pre_n]);
    arr_fn(&a, &format!("{init} {dead} {lp} return {cnt};"))
}

fn sort(c: &mut Ctx, up: bool) -> String {
    let a = c.arr();
    match c.int(0, 2) {
        0 => {
            let d = sign(c, up);
            bubble(c, &a, &move |_: &mut Ctx, x, y| format!("({x} - {y}) * ({d}) > 0"))
        }
        1 => selection(c, &a, if up { "<" } else { ">" }),
        _ => {
            if up {
                bubble(c, &a, &asc)
            } else {
                insertion(c, &a, ">")
            }
        }
    }
}

fn max_diff(c: &mut Ctx) -> String {
    let a = c.arr();
    let (pre_n, n) = c.len_of(&a);
    let dead = c.dead(&[&format!("len({a})")]);
    let (i, hi, lo) = (c.idx(), c.var(), c.var());
    let upd = c.shuffled(vec![
        format!("if {a}[{i}] > {hi} {{ {hi} = {a}[{i}]; }}"),
        format!("if {a}[{i}] < {lo} {{ {lo} = {a}[{i}]; }}"),
    ]);
    let lp = c.count_up(&i, "1", &n, &upd);
    let init = c.shuffled(vec![format!("{hi} = {a}[0];"), format!("{lo} = {a}[0];"), pre_n]);
    arr_fn(&a, &format!("{init} {dead} {lp} return {hi} - {lo};"))
}

fn contains(c: &mut Ctx) -> String {
    let a = c.arr();
    let x = c.var();
    let (pre_n, n) = c.len_of(&a);
    let dead = c.dead(&[&x]);
    let (i, r) = (c.idx(), c.var());
    let eq = c.pick(&["X == V", "V == X"]).replace('X', &format!("{a}[{i}]")).replace('V', &x);
    let lp = c.each_index(&i, &n, &format!("if {eq} {{ {r} = true; }}"));
    let init = c.shuffled(vec![format!("{r} = false;"), pre_n]);
    func(&format!("{a}: int[], {x}: int"), &format!("{init} {dead} {lp} return {r};"))
}

fn index_of(c: &mut Ctx) -> String {
    let a = c.arr();
    let x = c.var();
    let (pre_n, n) = c.len_of(&a);
    let dead = c.dead(&[&x]);
    let (i, r) = (c.idx(), c.var());
    let body = if c.coin() {
        let lp = c.count_up(&i, "0", &n, &format!("if {a}[{i}] == {x} && {r} == -1 {{ {r} = {i}; }}"));
        format!("{r} = -1; {lp}")
    } else {
        let inc = c.incr(&i, "1");
        format!("{i} = 0; while {i} < {n} && {a}[{i}] != {x} {{ {inc} }} {r} = -1; if {i} < {n} {{ {r} = {i}; }}")
    };
    func(&format!("{a}: int[], {x}: int"), &format!("{pre_n} {dead} {body} return {r};"))
}

fn sum_two(c: &mut Ctx) -> String {
    let (x, y, s) = (c.var(), c.var(), c.var());
    let dead = c.dead(&[&x, &y]);
    let body = match c.int(0, 3) {
        0 => format!("{s} = {x} + {y};"),
        1 => format!("{s} = {y} + {x};"),
        2 => {
            let inc = c.incr(&s, &y);
            format!("{s} = {x}; {inc}")
        }
        _ => {
            let t = c.var();
            format!("{t} = {y}; {s} = {x} + {t};")
        }
    };
    func(&format!("{x}: int, {y}: int"), &format!("{dead} {body} return {s};"))
}

/// One source for method name `name`.
pub(crate) fn naming_source(rng: &mut Chacha, name: &str) -> String {
    let c = &mut Ctx::new(rng);
    match name {
        "reverse_array" => reverse(c),
        "sum_array" => sum(c),
        "find_max" => extreme(c, true),
        "find_min" => extreme(c, false),
        "count_positive" => signed_count(c, true),
        "count_negative" => signed_count(c, false),
        "sort_array" => sort(c, true),
        "sort_array_descending" => sort(c, false),
        "find_max_diff" => max_diff(c),
        "contains_value" => contains(c),
        "index_of_value" => index_of(c),
        "sum_two_numbers" => sum_two(c),
        other => unreachable!("unknown name {other}"),
    }
}
