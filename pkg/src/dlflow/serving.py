"""Packaging and serving: wraps an approved model version with its
preprocessing, serves predictions, and captures every request (including
malformed ones) as an append-only scoring record.

The serving forward pass reuses the learners' own code paths, so online
scores are bit-identical to offline evaluation on the same input.
"""

import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ._util import append_record, canonical_json, digest_of, read_records, sha256_hex
from .errors import (
    EndpointConflict,
    MalformedPayload,
    MissingArtifact,
    NoProductionVersion,
    NotFound,
    WrongStage,
)
from .experiment import ExperimentTracker
from .learners.nn import Mlp
from .learners.text import LabelEncoding, Vocabulary, vectorize
from .registry import ModelRegistry

TEXT_WRAPPER = {
    "init": ["weights", "vocabulary", "labels"],
    "preprocess": [{"transform": "text-count-vector", "params": {}}],
    "postprocess": "label-decode",
}

IMAGE_WRAPPER = {
    "init": ["weights", "labels"],
    "preprocess": [
        {"transform": "pixel-normalize", "params": {"scale": 255}},
        {"transform": "flatten", "params": {}},
    ],
    "postprocess": "label-decode",
}


@dataclass(frozen=True)
class PackagedModel:
    model_name: str
    version: int
    wrapper: dict
    package_hash: str


@dataclass
class Deployment:
    deployment_name: str
    model_name: str
    version: int
    package_hash: str
    endpoint: str
    replicas: int = 1
    resources: dict = field(default_factory=dict)
    status: str = "active"


class _Runtime:
    """A loaded package: artifacts in memory, ready to answer requests."""

    def __init__(self, package: PackagedModel, artifacts: dict[str, bytes]):
        self.package = package
        self.model = Mlp.deserialize(artifacts["weights"])
        self.labels = LabelEncoding.from_bytes(artifacts["labels"])
        self.vocabulary = (
            Vocabulary.from_bytes(artifacts["vocabulary"])
            if "vocabulary" in artifacts
            else None
        )

    def _preprocess(self, data) -> np.ndarray:
        if not isinstance(data, dict):
            raise MalformedPayload("data must be an object")
        value = None
        for step in self.package.wrapper["preprocess"]:
            transform = step["transform"]
            params = step.get("params", {})
            if transform == "text-count-vector":
                text = data.get("text")
                if not isinstance(text, str):
                    raise MalformedPayload("text payload requires data.text string")
                value = vectorize(text, self.vocabulary)
            elif transform == "pixel-normalize":
                image = data.get("image")
                if image is None:
                    raise MalformedPayload("image payload requires data.image matrix")
                try:
                    arr = np.asarray(image, dtype=np.float64)
                except (TypeError, ValueError) as exc:
                    raise MalformedPayload(f"bad image matrix: {exc}") from exc
                if arr.ndim != 2:
                    raise MalformedPayload(f"image must be 2-d, got {arr.ndim}-d")
                value = arr / float(params.get("scale", 255))
            elif transform == "flatten":
                value = np.asarray(value).ravel()
            else:
                raise MalformedPayload(f"unknown preprocess transform {transform!r}")
        if value is None:
            raise MalformedPayload("empty preprocess chain")
        return np.asarray(value, dtype=np.float64)

    def predict(self, data) -> tuple[str, dict[str, float]]:
        features = self._preprocess(data)
        if features.ndim == 1:
            features = features[None, :]
        if features.shape[1] != self.model.dims[0]:
            raise MalformedPayload(
                f"feature length {features.shape[1]} != model input {self.model.dims[0]}"
            )
        probs, _ = self.model.forward(features, train=False)
        scores = {
            self.labels.decode(i): float(probs[0, i]) for i in range(probs.shape[1])
        }
        label = self.labels.decode(int(np.argmax(probs[0])))
        return label, scores


class ServingGateway:
    def __init__(self, root: Path, registry: ModelRegistry,
                 experiments: ExperimentTracker, clock):
        self.root = Path(root)
        self.registry = registry
        self.experiments = experiments
        self.clock = clock
        self._runtimes: dict[str, _Runtime] = {}

    # -- paths --

    @property
    def _packages_path(self) -> Path:
        return self.root / "serving" / "packages.jsonl"

    @property
    def _deployments_path(self) -> Path:
        return self.root / "serving" / "deployments.jsonl"

    def _scoring_path(self, deployment: str) -> Path:
        return self.root / "serving" / "scoring" / f"{deployment}.jsonl"

    # -- packaging --

    def package_model(self, name: str, version: int, wrapper: dict) -> PackagedModel:
        mv = self.registry.get_version(name, version)
        if mv.stage not in ("approved", "production"):
            raise WrongStage(f"packaging requires approved or production, not {mv.stage}")
        _exp, ckpt = self.experiments.get_checkpoint(mv.checkpoint)
        for artifact_name in wrapper.get("init", []):
            if artifact_name not in ckpt.artifacts:
                raise MissingArtifact(
                    f"artifact {artifact_name!r} not in checkpoint {mv.checkpoint}"
                )
        package_hash = digest_of({"model": name, "version": version, "wrapper": wrapper})
        known = {rec["package_hash"] for rec in read_records(self._packages_path)}
        if package_hash not in known:
            append_record(
                self._packages_path,
                {
                    "package_hash": package_hash,
                    "model_name": name,
                    "version": version,
                    "wrapper": wrapper,
                },
            )
        return PackagedModel(name, version, wrapper, package_hash)

    def get_package(self, name: str, version: int) -> PackagedModel:
        found = None
        for rec in read_records(self._packages_path):
            if rec["model_name"] == name and rec["version"] == version:
                found = rec
        if found is None:
            raise NotFound(f"no package for {name} v{version}")
        return PackagedModel(
            found["model_name"], found["version"], found["wrapper"], found["package_hash"]
        )

    # -- deployment --

    def list_deployments(self) -> list[Deployment]:
        latest: dict[str, Deployment] = {}
        for rec in read_records(self._deployments_path):
            latest[rec["deployment_name"]] = Deployment(
                deployment_name=rec["deployment_name"],
                model_name=rec["model_name"],
                version=rec["version"],
                package_hash=rec["package_hash"],
                endpoint=rec["endpoint"],
                replicas=rec.get("replicas", 1),
                resources=rec.get("resources", {}),
                status=rec.get("status", "active"),
            )
        return [latest[name] for name in sorted(latest)]

    def get_deployment(self, name: str) -> Deployment:
        for dep in self.list_deployments():
            if dep.deployment_name == name and dep.status == "active":
                return dep
        raise NotFound(f"deployment {name!r} not found")

    def deploy(self, manifest: dict, staging: bool = False) -> Deployment:
        name = manifest["deployment_name"]
        model_name = manifest["model_name"]
        selector = manifest.get("selector", {"stage": "production"})
        if "version" in selector:
            mv = self.registry.get_version(model_name, int(selector["version"]))
            if mv.stage == "production":
                pass
            elif mv.stage == "approved" and staging:
                pass
            else:
                raise WrongStage(
                    f"{model_name} v{mv.version} is {mv.stage}; deploying a "
                    "non-production version requires staging mode on an approved one"
                )
        else:
            mv = self.registry.production_version(model_name)
            if mv is None:
                raise NoProductionVersion(f"{model_name} has no production version")
        package = self.get_package(model_name, mv.version)

        endpoint = manifest.get("endpoint", f"/predict/{name}")
        for dep in self.list_deployments():
            if dep.status == "active" and dep.deployment_name != name and dep.endpoint == endpoint:
                raise EndpointConflict(f"endpoint {endpoint!r} already in use by {dep.deployment_name}")

        deployment = Deployment(
            deployment_name=name,
            model_name=model_name,
            version=mv.version,
            package_hash=package.package_hash,
            endpoint=endpoint,
            replicas=int(manifest.get("replicas", 1)),
            resources=manifest.get("resources", {}),
        )
        append_record(
            self._deployments_path,
            {
                "deployment_name": name,
                "model_name": model_name,
                "version": mv.version,
                "package_hash": package.package_hash,
                "endpoint": endpoint,
                "replicas": deployment.replicas,
                "resources": deployment.resources,
                "status": "active",
                "at": self.clock.now(),
            },
        )
        self._runtimes[name] = self._load_runtime(package)
        return deployment

    def _load_runtime(self, package: PackagedModel) -> _Runtime:
        mv = self.registry.get_version(package.model_name, package.version)
        _exp, ckpt = self.experiments.get_checkpoint(mv.checkpoint)
        artifacts = self.experiments.read_artifacts(ckpt)
        return _Runtime(package, artifacts)

    def _runtime_for(self, deployment_name: str) -> tuple[Deployment, _Runtime]:
        dep = self.get_deployment(deployment_name)
        runtime = self._runtimes.get(deployment_name)
        if runtime is None or runtime.package.package_hash != dep.package_hash:
            runtime = self._load_runtime(self.get_package(dep.model_name, dep.version))
            self._runtimes[deployment_name] = runtime
        return dep, runtime

    # -- prediction --

    def predict(self, deployment_name: str, payload) -> dict:
        dep, runtime = self._runtime_for(deployment_name)
        request_id = str(uuid.uuid4())
        received_at = self.clock.now()
        started = time.perf_counter()
        record = {
            "request_id": request_id,
            "received_at": received_at,
            "deployment_name": deployment_name,
            "model_version": dep.version,
            "input_digest": sha256_hex(canonical_json(payload).encode("utf-8")),
        }
        try:
            if not isinstance(payload, dict) or "data" not in payload:
                raise MalformedPayload("payload must be an object with a data field")
            label, scores = runtime.predict(payload["data"])
        except MalformedPayload as exc:
            record.update(
                status="error",
                error=str(exc),
                latency_us=int((time.perf_counter() - started) * 1e6),
            )
            append_record(self._scoring_path(deployment_name), record)
            raise
        record.update(
            status="ok",
            prediction={"label": label, "scores": scores},
            latency_us=int((time.perf_counter() - started) * 1e6),
        )
        append_record(self._scoring_path(deployment_name), record)
        return {
            "label": label,
            "scores": scores,
            "model_version": dep.version,
            "request_id": request_id,
        }

    def scoring_records(self, deployment_name: str, since: Optional[int] = None) -> list[dict]:
        records = read_records(self._scoring_path(deployment_name))
        if since is not None:
            records = [rec for rec in records if rec["received_at"] >= since]
        return records
