#!/usr/bin/env node
// SMT-LIB2 stdin/stdout bridge to the WebAssembly build of Z3.
//
// Usage:  node tools/z3-stdio.js
//
// Lets the verifier run against a real Z3 without a native binary:
//   slicer verify prog.sl --solver-cmd "node tools/z3-stdio.js"
// Requires `npm install z3-solver` in this directory.

const { init } = require('z3-solver');

async function main() {
  const { Z3 } = await init();
  const cfg = Z3.mk_config();
  const ctx = Z3.mk_context(cfg);

  let buf = '';
  let depth = 0;
  let inString = false;
  let inComment = false;
  let completeUpto = 0;

  process.stdin.setEncoding('utf8');

  let queue = Promise.resolve();

  process.stdin.on('data', (chunk) => {
    for (const c of chunk) {
      buf += c;
      if (inComment) {
        if (c === '\n') inComment = false;
        continue;
      }
      if (inString) {
        if (c === '"') inString = false;
        continue;
      }
      if (c === '"') inString = true;
      else if (c === ';') inComment = true;
      else if (c === '(') depth += 1;
      else if (c === ')') {
        depth -= 1;
        if (depth <= 0) {
          depth = 0;
          completeUpto = buf.length;
        }
      }
    }
    if (completeUpto > 0) {
      const script = buf.slice(0, completeUpto);
      buf = buf.slice(completeUpto);
      completeUpto = 0;
      queue = queue.then(async () => {
        const exitAt = script.search(/\(\s*exit\s*\)/);
        const body = exitAt >= 0 ? script.slice(0, exitAt) : script;
        if (body.trim().length > 0) {
          try {
            const out = await Z3.eval_smtlib2_string(ctx, body);
            if (out && out.length > 0) process.stdout.write(out);
          } catch (e) {
            process.stdout.write(`(error "${String(e).replace(/"/g, "'")}")\n`);
          }
        }
        if (exitAt >= 0) process.exit(0);
      });
    }
  });

  process.stdin.on('end', () => {
    queue.then(() => process.exit(0));
  });
}

main();
