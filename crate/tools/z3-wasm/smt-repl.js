#!/usr/bin/env node
// Incremental SMT-LIB2 REPL over stdin/stdout, backed by the z3 WASM build.
// Behaves like `z3 -in`: commands are evaluated as soon as a balanced form
// arrives, answers are written back immediately. State persists across
// commands until a (reset).

"use strict";

const { init } = require("z3-solver");

function findForms(buf) {
  // Split off every complete top-level s-expression currently in `buf`.
  const forms = [];
  let depth = 0;
  let start = 0;
  let i = 0;
  let inStr = false;
  let inSym = false;
  let inComment = false;
  while (i < buf.length) {
    const c = buf[i];
    if (inComment) {
      if (c === "\n") inComment = false;
    } else if (inStr) {
      if (c === '"') inStr = false;
    } else if (inSym) {
      if (c === "|") inSym = false;
    } else if (c === ";") {
      inComment = true;
    } else if (c === '"') {
      inStr = true;
    } else if (c === "|") {
      inSym = true;
    } else if (c === "(") {
      if (depth === 0) start = i;
      depth += 1;
    } else if (c === ")") {
      depth -= 1;
      if (depth === 0) forms.push(buf.slice(start, i + 1));
      if (depth < 0) depth = 0;
    }
    i += 1;
  }
  const rest = depth > 0 ? buf.slice(start) : "";
  return { forms, rest };
}

async function main() {
  const { Z3 } = await init();
  let ctx = Z3.mk_context(Z3.mk_config());
  let pending = "";

  process.stdin.setEncoding("utf8");
  process.stdout.write("; ready\n");

  for await (const chunk of process.stdin) {
    pending += chunk;
    const { forms, rest } = findForms(pending);
    pending = rest;
    for (const form of forms) {
      if (/^\(\s*exit\s*\)$/.test(form)) {
        process.exit(0);
      }
      if (/^\(\s*reset\s*\)$/.test(form)) {
        ctx = Z3.mk_context(Z3.mk_config());
        continue;
      }
      let out;
      try {
        out = await Z3.eval_smtlib2_string(ctx, form);
      } catch (e) {
        out = `(error "${String(e).replace(/"/g, "'")}")`;
      }
      if (out && out.trim().length > 0) {
        process.stdout.write(out.trim() + "\n");
      }
    }
  }
}

main();
