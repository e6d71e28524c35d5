#!/usr/bin/env python3
"""Differential fuzzer: lia-smt vs z3-wasm vs brute-force enumeration.

Generates random QF_LIA scripts, runs both solvers on identical input,
and for box-bounded instances also checks against exhaustive enumeration.
Development tool only.
"""

import itertools
import random
import subprocess
import sys

LIA = ["/root/crate/target/debug/lia-smt", "--budget", "300000"]
Z3 = ["node", "/root/crate/tools/z3-stdio.js"]


class Proc:
    def __init__(self, cmd):
        self.p = subprocess.Popen(
            cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
        )

    def send(self, text):
        self.p.stdin.write(text + "\n")
        self.p.stdin.flush()

    def read_line(self):
        return self.p.stdout.readline().strip()


def rand_linexpr(rng, vars_):
    n = rng.randint(1, min(3, len(vars_)))
    chosen = rng.sample(vars_, n)
    parts = []
    for v in chosen:
        c = rng.choice([-3, -2, -1, 1, 2, 3])
        cs = str(c) if c >= 0 else f"(- {-c})"
        parts.append(f"(* {cs} {v})" if c != 1 else v)
    k = rng.randint(-5, 5)
    parts.append(str(k) if k >= 0 else f"(- {-k})")
    return f"(+ {' '.join(parts)})" if len(parts) > 1 else parts[0]


def rand_atom(rng, ivars, bvars):
    if bvars and rng.random() < 0.2:
        return rng.choice(bvars)
    op = rng.choice(["<=", "<", ">=", ">", "=", "distinct"])
    a = rand_linexpr(rng, ivars)
    b = rand_linexpr(rng, ivars)
    return f"({op} {a} {b})"


def rand_formula(rng, ivars, bvars, depth):
    if depth == 0 or rng.random() < 0.3:
        return rand_atom(rng, ivars, bvars)
    op = rng.choice(["and", "or", "not", "=>"])
    if op == "not":
        return f"(not {rand_formula(rng, ivars, bvars, depth - 1)})"
    n = rng.randint(2, 3)
    args = " ".join(rand_formula(rng, ivars, bvars, depth - 1) for _ in range(n))
    return f"({op} {args})"


def eval_sexpr(expr, env):
    """Tiny evaluator for the generated formula grammar."""
    tokens = expr.replace("(", " ( ").replace(")", " ) ").split()

    def parse(it):
        t = next(it)
        if t == "(":
            items = []
            while True:
                nxt = next(it)
                if nxt == ")":
                    return items
                if nxt == "(":
                    items.append(parse_from_open(it))
                else:
                    items.append(nxt)
        return t

    def parse_from_open(it):
        items = []
        while True:
            nxt = next(it)
            if nxt == ")":
                return items
            if nxt == "(":
                items.append(parse_from_open(it))
            else:
                items.append(nxt)

    def ev(node):
        if isinstance(node, str):
            if node in env:
                return env[node]
            return int(node)
        head = node[0]
        args = node[1:]
        if head == "+":
            return sum(ev(a) for a in args)
        if head == "-":
            if len(args) == 1:
                return -ev(args[0])
            r = ev(args[0])
            for a in args[1:]:
                r -= ev(a)
            return r
        if head == "*":
            r = 1
            for a in args:
                r *= ev(a)
            return r
        if head == "<=":
            return ev(args[0]) <= ev(args[1])
        if head == "<":
            return ev(args[0]) < ev(args[1])
        if head == ">=":
            return ev(args[0]) >= ev(args[1])
        if head == ">":
            return ev(args[0]) > ev(args[1])
        if head == "=":
            return ev(args[0]) == ev(args[1])
        if head == "distinct":
            return ev(args[0]) != ev(args[1])
        if head == "and":
            return all(ev(a) for a in args)
        if head == "or":
            return any(ev(a) for a in args)
        if head == "not":
            return not ev(args[0])
        if head == "=>":
            vals = [ev(a) for a in args]
            for v in vals[:-1]:
                if not v:
                    return True
            return vals[-1]
        raise ValueError(f"unknown head {head}")

    it = iter(tokens)
    first = next(it)
    node = parse_from_open(it) if first == "(" else first
    return ev(node)


def brute_force(formulas, ivars, bvars, lo, hi):
    for ivals in itertools.product(range(lo, hi + 1), repeat=len(ivars)):
        for bvals in itertools.product([True, False], repeat=len(bvars)):
            env = dict(zip(ivars, ivals))
            env.update(dict(zip(bvars, bvals)))
            env["true"] = True
            env["false"] = False
            if all(eval_sexpr(f, env) for f in formulas):
                return "sat"
    return "unsat"


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
    cases = int(sys.argv[2]) if len(sys.argv) > 2 else 200
    rng = random.Random(seed)

    lia = Proc(LIA)
    z3 = Proc(Z3)

    mismatches = 0
    unknowns = 0
    for case in range(cases):
        nvars = rng.randint(1, 4)
        nbools = rng.randint(0, 2)
        ivars = [f"v{i}" for i in range(nvars)]
        bvars = [f"p{i}" for i in range(nbools)]
        nasserts = rng.randint(1, 4)
        formulas = [rand_formula(rng, ivars, bvars, rng.randint(0, 3)) for _ in range(nasserts)]
        bounded = rng.random() < 0.5
        if bounded:
            for v in ivars:
                formulas.append(f"(and (<= (- 4) {v}) (<= {v} 4))")

        script = []
        for v in ivars:
            script.append(f"(declare-fun {v} () Int)")
        for v in bvars:
            script.append(f"(declare-fun {v} () Bool)")
        for f in formulas:
            script.append(f"(assert {f})")
        script.append("(check-sat)")
        text = "\n".join(script)

        lia.send(text)
        z3.send(text)
        r_lia = lia.read_line()
        r_z3 = z3.read_line()

        if r_lia == "unknown":
            unknowns += 1
            ok = True
        else:
            ok = r_lia == r_z3
        detail = ""
        if bounded and ok and r_lia != "unknown":
            bf = brute_force(formulas, ivars, bvars, -4, 4)
            if bf != r_lia:
                ok = False
                detail = f" brute-force={bf}"
        if not ok:
            mismatches += 1
            print(f"case {case}: lia={r_lia} z3={r_z3}{detail}", flush=True)
            print(text)
            print("---")
        if case % 20 == 0:
            print(f"... case {case}", flush=True)
        lia.send("(reset)")
        z3.send("(reset)")

    lia.send("(exit)")
    z3.send("(exit)")
    print(f"{cases} cases, {mismatches} mismatches, {unknowns} unknowns")
    return 1 if mismatches else 0


if __name__ == "__main__":
    sys.exit(main())
