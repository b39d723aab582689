#!/usr/bin/env python3
"""Hosts Hugging Face checkpoints for the s2st C++ library.

    hf_worker.py fetch MODEL_ID DEST   download a snapshot into DEST
    hf_worker.py serve                 JSON lines on stdin/stdout: load, transcribe, translate, synthesize
    hf_worker.py train                 JSON lines on stdin/stdout: begin, epoch

Every request gets exactly one reply line. Failures reply {"error": "..."}.
Anything else written to stdout by libraries is redirected to stderr.
"""

import base64
import io
import json
import os
import sys
import wave


def _reply_stream():
    # Libraries sometimes print to stdout; keep the protocol channel clean.
    out = os.fdopen(os.dup(sys.stdout.fileno()), "w", buffering=1, encoding="utf-8")
    os.dup2(sys.stderr.fileno(), sys.stdout.fileno())
    return out


def fetch(model_id, dest):
    from huggingface_hub import snapshot_download

    snapshot_download(repo_id=model_id, local_dir=dest)


def read_wav(data):
    import numpy as np

    with wave.open(io.BytesIO(data)) as w:
        if w.getsampwidth() != 2:
            raise ValueError("expected PCM16 WAV")
        frames = w.readframes(w.getnframes())
        audio = np.frombuffer(frames, dtype="<i2").astype(np.float32) / 32767.0
        if w.getnchannels() > 1:
            audio = audio.reshape(-1, w.getnchannels()).mean(axis=1)
        return audio, w.getframerate()


def write_wav(samples, rate):
    import numpy as np

    pcm = np.clip(np.round(np.asarray(samples, dtype=np.float64) * 32767.0), -32767, 32767).astype("<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(pcm.tobytes())
    return buf.getvalue()


class Models:
    def __init__(self):
        self.stage = None
        self.model = None
        self.processor = None
        self.device = "cpu"

    def load(self, msg):
        import torch

        self.device = "cuda" if torch.cuda.is_available() else "cpu"
        self.stage = msg["stage"]
        path = msg["model_dir"]
        if self.stage == "asr":
            from transformers import Wav2Vec2ForCTC, Wav2Vec2Processor

            self.processor = Wav2Vec2Processor.from_pretrained(path)
            self.model = Wav2Vec2ForCTC.from_pretrained(path).to(self.device).eval()
        elif self.stage == "nmt":
            from transformers import MBart50TokenizerFast, MBartForConditionalGeneration

            self.processor = MBart50TokenizerFast.from_pretrained(path)
            self.model = MBartForConditionalGeneration.from_pretrained(path).to(self.device).eval()
        elif self.stage == "tts":
            from transformers import AutoProcessor, BarkModel

            self.processor = AutoProcessor.from_pretrained(path)
            self.model = BarkModel.from_pretrained(path).to(self.device).eval()
        else:
            raise ValueError("unknown stage " + str(self.stage))
        return {"ok": True}

    def transcribe(self, msg):
        import torch

        audio, rate = read_wav(base64.b64decode(msg["wav_b64"]))
        inputs = self.processor(audio, sampling_rate=rate, return_tensors="pt").to(self.device)
        with torch.no_grad():
            logits = self.model(**inputs).logits
        ids = torch.argmax(logits, dim=-1)
        return {"text": self.processor.batch_decode(ids)[0]}

    def translate(self, msg):
        import torch

        self.processor.src_lang = msg.get("source_code", "hi_IN")
        encoded = self.processor(msg["text"], return_tensors="pt").to(self.device)
        target = msg.get("target_code", "en_XX")
        with torch.no_grad():
            tokens = self.model.generate(**encoded, forced_bos_token_id=self.processor.lang_code_to_id[target])
        return {"text": self.processor.batch_decode(tokens, skip_special_tokens=True)[0]}

    def synthesize(self, msg):
        import torch

        inputs = self.processor(msg["text"], voice_preset=msg["voice"]).to(self.device)
        with torch.no_grad():
            audio = self.model.generate(**inputs)
        rate = self.model.generation_config.sample_rate
        return {"wav_b64": base64.b64encode(write_wav(audio.cpu().numpy().squeeze(), rate)).decode("ascii")}


class Trainer:
    """Reference CTC fine-tuning adapter.

    Assumptions not fixed by the recipe: AdamW, batch size 8, no warmup,
    feature encoder frozen, fp32.
    """

    def __init__(self):
        self.model = None

    def begin(self, msg):
        import torch
        from transformers import Wav2Vec2ForCTC

        torch.manual_seed(int(msg["config"]["seed"]))
        vocab = msg["vocab"]
        self.pad_id = vocab["[PAD]"]
        self.train = msg["train"]
        self.dev = msg["dev"]
        self.device = "cuda" if torch.cuda.is_available() else "cpu"
        self.model = Wav2Vec2ForCTC.from_pretrained(
            msg["config"]["base_model_id"],
            vocab_size=len(vocab),
            pad_token_id=self.pad_id,
            ctc_loss_reduction="mean",
        ).to(self.device)
        self.model.freeze_feature_encoder()
        self.optimizer = None
        return {"ok": True}

    def _batch(self, entries):
        import numpy as np
        import torch

        audio = []
        for e in entries:
            with open(e["audio_path"], "rb") as f:
                samples, _ = read_wav(f.read())
            samples = (samples - samples.mean()) / (samples.std() + 1e-7)
            audio.append(samples)
        width = max(len(a) for a in audio)
        values = np.zeros((len(audio), width), dtype=np.float32)
        mask = np.zeros((len(audio), width), dtype=np.int64)
        for i, a in enumerate(audio):
            values[i, : len(a)] = a
            mask[i, : len(a)] = 1
        return torch.from_numpy(values).to(self.device), torch.from_numpy(mask).to(self.device)

    def epoch(self, msg):
        import random

        import torch

        lr, wd = float(msg["learning_rate"]), float(msg["weight_decay"])
        if self.optimizer is None:
            self.optimizer = torch.optim.AdamW(self.model.parameters(), lr=lr, weight_decay=wd)
        for group in self.optimizer.param_groups:
            group["lr"], group["weight_decay"] = lr, wd

        rng = random.Random(int(msg["seed"]) * 100003 + int(msg["epoch"]))
        order = list(range(len(self.train)))
        rng.shuffle(order)
        self.model.train()
        for start in range(0, len(order), 8):
            chunk = [self.train[i] for i in order[start : start + 8]]
            values, mask = self._batch(chunk)
            width = max(len(e["labels"]) for e in chunk)
            labels = torch.full((len(chunk), width), -100, dtype=torch.long)
            for i, e in enumerate(chunk):
                labels[i, : len(e["labels"])] = torch.tensor(e["labels"], dtype=torch.long)
            loss = self.model(values, attention_mask=mask, labels=labels.to(self.device)).loss
            self.optimizer.zero_grad()
            loss.backward()
            self.optimizer.step()

        self.model.eval()
        frames = []
        with torch.no_grad():
            for e in self.dev:
                values, mask = self._batch([e])
                logits = self.model(values, attention_mask=mask).logits
                frames.append(torch.argmax(logits, dim=-1)[0].tolist())
        return {"frames": frames}


def serve_loop(handlers):
    out = _reply_stream()
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
            handler = handlers.get(msg.get("op"))
            if handler is None:
                raise ValueError("unknown op " + repr(msg.get("op")))
            reply = handler(msg)
        except Exception as exc:  # reported to the caller, which raises
            reply = {"error": "%s: %s" % (type(exc).__name__, exc)}
        out.write(json.dumps(reply, ensure_ascii=False) + "\n")
        out.flush()


def main(argv):
    if len(argv) == 4 and argv[1] == "fetch":
        fetch(argv[2], argv[3])
        return 0
    if len(argv) == 2 and argv[1] == "serve":
        m = Models()
        serve_loop({"load": m.load, "transcribe": m.transcribe, "translate": m.translate, "synthesize": m.synthesize})
        return 0
    if len(argv) == 2 and argv[1] == "train":
        t = Trainer()
        serve_loop({"begin": t.begin, "epoch": t.epoch})
        return 0
    sys.stderr.write(__doc__)
    return 2


if __name__ == "__main__":
    sys.exit(main(sys.argv))
