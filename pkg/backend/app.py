from flask import Flask, jsonify, make_response, request, send_file
import os
import sys

from config import RUN_WORKER_ENABLED, RUNS_DIR, configure_logging  # type: ignore

_BACKEND_DIR = os.path.dirname(os.path.abspath(__file__))
_SCRIPTS_DIR = os.path.join(_BACKEND_DIR, "scripts")
if _SCRIPTS_DIR not in sys.path:
    sys.path.append(_SCRIPTS_DIR)

# Same module objects as harness and the worker, so ConfigError and the
# job-store root are shared.
import harness  # type: ignore
import run_config  # type: ignore
import run_queue as queue  # type: ignore
from build_info import get_build_info  # type: ignore

configure_logging()
print(f"🔧 Config loaded: RUNS_DIR={RUNS_DIR}, worker={'✅ on' if RUN_WORKER_ENABLED else '❌ off'}", flush=True)

app = Flask(__name__)

# Config text only; a large body is a mistake, not a run.
app.config['MAX_CONTENT_LENGTH'] = 1 * 1024 * 1024

# Background run worker. Guarded by RUN_WORKER_ENABLED.
try:
    from run_worker import start_worker as _start_run_worker  # type: ignore
    _start_run_worker(app)
except Exception as _rw_err:
    print(f"⚠️ Run worker not started: {_rw_err}", flush=True)


@app.errorhandler(413)
def request_entity_too_large(_e):
    if (request.path or "").startswith("/api/"):
        return jsonify({"success": False, "error": "Request too large (max 1 MB)"}), 413
    return make_response("Request too large", 413)


@app.errorhandler(404)
def api_not_found(_e):
    if (request.path or "").startswith("/api/"):
        return jsonify({"success": False, "error": "Not found"}), 404
    return make_response("Not Found", 404)


@app.errorhandler(500)
def api_internal_error(_e):
    if (request.path or "").startswith("/api/"):
        return jsonify({"success": False, "error": "Internal server error"}), 500
    return make_response("Internal Server Error", 500)


def _job_or_404(job_id):
    try:
        job = queue.get_job(job_id)
    except ValueError:
        job = None
    if not job:
        return None, (jsonify({"success": False, "error": f"Unknown run {job_id}"}), 404)
    return job, None


@app.route('/healthz')
def healthz():
    return make_response("ok", 200)


@app.route('/api/health')
def api_health():
    jobs = queue.list_jobs()
    counts = {}
    for job in jobs:
        counts[job.get("status")] = counts.get(job.get("status"), 0) + 1
    return jsonify({
        "success": True,
        "build": get_build_info(),
        "worker_enabled": bool(RUN_WORKER_ENABLED),
        "jobs": counts,
    })


@app.route('/api/presets')
def api_presets():
    return jsonify({"success": True, "presets": harness.list_presets()})


@app.route('/api/presets/<name>')
def api_preset(name):
    try:
        path = harness.preset_path(name)
    except run_config.ConfigError as exc:
        return jsonify({"success": False, "error": exc.message}), 404
    return jsonify({"success": True, "name": path.stem, "config": path.read_text(encoding="utf-8")})


@app.route('/api/runs', methods=['POST'])
def api_create_run():
    data = request.get_json(silent=True) or {}
    preset = (data.get("preset") or "").strip()
    text = data.get("config")
    if not preset and not isinstance(text, str):
        return jsonify({"success": False, "error": "Give either 'preset' or 'config'"}), 400

    try:
        if preset:
            cfg = run_config.parse_config(harness.preset_path(preset))
        else:
            cfg = run_config.parse_config_text(text)
    except run_config.ConfigError as exc:
        return jsonify({"success": False, "error": str(exc), "line": exc.line}), 400

    job = queue.enqueue(
        run_config.write_config(cfg),
        experiment=cfg.experiment,
        config_digest=run_config.config_digest(cfg),
        label=(data.get("label") or preset or ""),
    )
    print(f"📥 Run {job['job_id']} queued ({job['label']})", flush=True)
    return jsonify({"success": True, "job": job}), 201


@app.route('/api/runs', methods=['GET'])
def api_list_runs():
    return jsonify({"success": True, "jobs": queue.list_jobs()})


@app.route('/api/runs/<job_id>')
def api_get_run(job_id):
    job, err = _job_or_404(job_id)
    if err:
        return err
    return jsonify({"success": True, "job": job})


@app.route('/api/runs/<job_id>/curve.csv')
def api_run_curve(job_id):
    job, err = _job_or_404(job_id)
    if err:
        return err
    path = queue.output_dir(job_id) / "curve.csv"
    if not path.is_file():
        return jsonify({"success": False, "error": f"Run is {job.get('status')}; no curve yet"}), 404
    return send_file(path, mimetype="text/csv", as_attachment=False, download_name=f"{job_id}.csv")


@app.route('/api/runs/<job_id>/logs')
def api_run_logs(job_id):
    job, err = _job_or_404(job_id)
    if err:
        return err
    return jsonify({"success": True, "status": job.get("status"), "logs": queue.get_logs(job_id)})


if __name__ == '__main__':
    app.run(host="0.0.0.0", port=int(os.environ.get("PORT", "5000")), debug=False)
