import init, { rateCurve, dofTable, powerSplit } from "./pkg/rsmcast_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function fail(el, e) {
  el.innerHTML = "";
  const p = document.createElement("p");
  p.className = "err";
  p.textContent = String(e);
  el.appendChild(p);
}

// Runs `work` after the browser has painted the "working" message.
function later(msgEl, work) {
  msgEl.textContent = "working...";
  setTimeout(() => {
    const t0 = performance.now();
    try {
      work();
      msgEl.textContent = `done in ${((performance.now() - t0) / 1000).toFixed(2)} s`;
    } catch (e) {
      fail(msgEl, e);
    }
  }, 20);
}

function plot(canvas, xs, series) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 44;
  ctx.clearRect(0, 0, w, h);
  const all = series.flatMap((s) => s.ys);
  const xmin = Math.min(...xs), xmax = Math.max(...xs, xmin + 1);
  const ymax = Math.max(...all, 1e-9) * 1.08;
  const X = (x) => pad + ((x - xmin) / (xmax - xmin)) * (w - 2 * pad);
  const Y = (y) => h - pad - (y / ymax) * (h - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "12px system-ui";
  ctx.beginPath();
  ctx.moveTo(pad, pad / 2);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad / 2, h - pad);
  ctx.stroke();
  for (const x of xs) ctx.fillText(String(x), X(x) - 6, h - pad + 16);
  for (let i = 0; i <= 4; i++) {
    const y = (ymax * i) / 4;
    ctx.fillText(y.toFixed(1), 4, Y(y) + 4);
  }
  ctx.fillText("SNR (dB)", w / 2 - 24, h - 8);
  ctx.fillText("bits/s/Hz", pad + 4, pad / 2 + 4);

  series.forEach((s, i) => {
    ctx.strokeStyle = s.color;
    ctx.fillStyle = s.color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    s.ys.forEach((y, j) => (j ? ctx.lineTo(X(xs[j]), Y(y)) : ctx.moveTo(X(xs[j]), Y(y))));
    ctx.stroke();
    s.ys.forEach((y, j) => ctx.fillRect(X(xs[j]) - 3, Y(y) - 3, 6, 6));
    ctx.fillText(s.label, w - 150, pad + 18 * i);
  });
  ctx.lineWidth = 1;
}

function table(rows, header) {
  const t = document.createElement("table");
  const tr = t.insertRow();
  for (const h of header) {
    const th = document.createElement("th");
    th.textContent = h;
    tr.appendChild(th);
  }
  for (const r of rows) {
    const row = t.insertRow();
    for (const v of r) row.insertCell().textContent = typeof v === "number" ? +v.toFixed(4) : v;
  }
  return t;
}

function runRateCurve() {
  later($("rc-msg"), () => {
    const c = JSON.parse(rateCurve($("rc-dims").value.trim(), num("rc-seed"), num("rc-lo"), num("rc-hi"), num("rc-step")));
    plot($("rc-plot"), c.snr_db, [
      { label: "rate splitting", ys: c.rs, color: "#c0392b" },
      { label: "classic (no RS)", ys: c.no_rs, color: "#2c3e50" },
    ]);
    $("rc-dof").textContent = `analytic DoF per subcarrier: classic ${c.dof_classic}, RS ${c.dof_rs}`;
  });
}

function runDof() {
  const out = $("dof-out");
  try {
    const rows = JSON.parse(dofTable(num("dof-m"), num("dof-g"), num("dof-nt")));
    out.innerHTML = "";
    out.appendChild(table(rows.map((r) => [r.n_tx, r.classic, r.rs]), ["antennas", "classic", "rate splitting"]));
  } catch (e) {
    fail(out, e);
  }
}

function runPowerSplit() {
  const out = $("ps-out");
  later($("ps-msg"), () => {
    const s = JSON.parse(powerSplit($("ps-dims").value.trim(), num("ps-seed"), num("ps-snr")));
    const rows = s.subcarriers.map((c, n) => [
      n,
      c.broadcast_power,
      c.group_power.map((p) => p.toFixed(3)).join(" / "),
      c.common_share.map((x) => x.toFixed(3)).join(" / "),
      c.group_rate.map((x) => x.toFixed(3)).join(" / "),
      c.mmf_rate,
    ]);
    out.innerHTML = "";
    const p = document.createElement("p");
    p.textContent = `budget ${s.total_power.toFixed(2)}, sum max-min rate ${s.sum_mmf.toFixed(4)} bits/s/Hz`;
    out.appendChild(p);
    out.appendChild(
      table(rows, ["subcarrier", "broadcast power", "group powers", "common shares", "group rates", "max-min rate"]),
    );
  });
}

await init();
$("rc-go").onclick = runRateCurve;
$("dof-go").onclick = runDof;
$("ps-go").onclick = runPowerSplit;
runDof();
