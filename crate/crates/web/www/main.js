// Build the bindings first (from crates/web):
//   wasm-pack build --target web --out-dir www/pkg
// then serve this directory, e.g. `python3 -m http.server -d www`.
import init, { noisy_selftest, werner_certification, robustness_curve_csv } from "./pkg/pauli_selftest_web.js";

const $ = (id) => document.getElementById(id);

function show(target, f) {
  try {
    target.textContent = JSON.stringify(JSON.parse(f()), null, 2);
  } catch (e) {
    target.textContent = String(e);
  }
}

function updateSelftest() {
  const eps = Number($("eps").value);
  $("eps-val").textContent = eps.toFixed(3);
  show($("selftest-out"), () => noisy_selftest(eps));
}

function updateCertification() {
  const p = Number($("cert-p").value);
  const eta = Number($("cert-eta").value);
  $("cert-p-val").textContent = p.toFixed(2);
  $("cert-eta-val").textContent = eta.toFixed(2);
  show($("cert-out"), () => werner_certification(p, eta));
}

function drawCurve(rows) {
  const c = $("curve");
  const g = c.getContext("2d");
  const pad = 36;
  g.clearRect(0, 0, c.width, c.height);
  const ymax = Math.max(1e-6, ...rows.map((r) => r.theta));
  const x = (eta) => pad + eta * (c.width - 2 * pad);
  const y = (t) => c.height - pad - (t / ymax) * (c.height - 2 * pad);
  g.strokeStyle = "#888";
  g.strokeRect(pad, pad, c.width - 2 * pad, c.height - 2 * pad);
  g.fillStyle = "#333";
  g.fillText("eta", c.width / 2, c.height - 8);
  g.fillText(ymax.toExponential(2), 2, pad - 6);
  g.strokeStyle = "#1565c0";
  g.beginPath();
  rows.forEach((r, i) => (i ? g.lineTo(x(r.eta), y(r.theta)) : g.moveTo(x(r.eta), y(r.theta))));
  g.stroke();
}

function updateCurve() {
  const p = Number($("curve-p").value);
  $("curve-p-val").textContent = p.toFixed(2);
  let csv;
  try {
    csv = robustness_curve_csv(p, 0, 1, 200);
  } catch (e) {
    $("curve-csv").textContent = String(e);
    return;
  }
  $("curve-csv").textContent = csv;
  const rows = csv
    .trim()
    .split("\n")
    .slice(1)
    .map((l) => {
      const [eta, , theta] = l.split(",").map(Number);
      return { eta, theta };
    });
  drawCurve(rows);
}

await init();
$("eps").addEventListener("input", updateSelftest);
$("cert-p").addEventListener("input", updateCertification);
$("cert-eta").addEventListener("input", updateCertification);
$("curve-p").addEventListener("input", updateCurve);
updateSelftest();
updateCertification();
updateCurve();
