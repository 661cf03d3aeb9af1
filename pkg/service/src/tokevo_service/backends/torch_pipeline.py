"""Real inference backend: one-step diffusion conditioned on raw token IDs,
CLIP cosine scoring against the original prompt text, and an MLP aesthetic
head over CLIP image embeddings.

Needs the optional ``real`` extra (torch, transformers, diffusers), model
weights on disk or a reachable hub, and realistically a GPU. It is not
exercised by the test suite; the synthetic backend covers the protocol.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

from . import ScoredItem


class TorchPipelineBackend:
    def __init__(self, config) -> None:
        import torch
        from diffusers import AutoPipelineForText2Image
        from transformers import CLIPModel, CLIPProcessor, CLIPTokenizer

        self._torch = torch
        self.device = config.device if torch.cuda.is_available() else "cpu"
        dtype = torch.float16 if self.device.startswith("cuda") else torch.float32

        self.tokenizer = CLIPTokenizer.from_pretrained(config.clip_model)
        self.pipe = AutoPipelineForText2Image.from_pretrained(
            config.generator_model, torch_dtype=dtype
        ).to(self.device)
        self.clip = CLIPModel.from_pretrained(config.clip_model).to(self.device)
        self.clip_processor = CLIPProcessor.from_pretrained(config.clip_model)
        self.aesthetic_head = self._load_aesthetic_head(config.aesthetic_weights)

        self.vocab_size = self.tokenizer.vocab_size
        self.bos_id = self.tokenizer.bos_token_id
        self.eos_id = self.tokenizer.eos_token_id
        self.pad_id = (
            self.tokenizer.pad_token_id
            if self.tokenizer.pad_token_id is not None
            else self.eos_id
        )
        self.context_len = self.tokenizer.model_max_length
        self.max_content_len = min(config.max_content_len, self.context_len - 2)
        self.model_ids = {
            "generator": config.generator_model,
            "clip": config.clip_model,
            "aesthetic": str(config.aesthetic_weights or "linear-head-untrained"),
        }

    def _load_aesthetic_head(self, weights_path):
        import torch

        # LAION-style regressor over 768-d CLIP ViT-L/14 image embeddings
        head = torch.nn.Sequential(
            torch.nn.Linear(768, 1024),
            torch.nn.Dropout(0.2),
            torch.nn.Linear(1024, 128),
            torch.nn.Dropout(0.2),
            torch.nn.Linear(128, 64),
            torch.nn.Dropout(0.1),
            torch.nn.Linear(64, 16),
            torch.nn.Linear(16, 1),
        )
        if weights_path is not None:
            head.load_state_dict(torch.load(weights_path, map_location="cpu"))
        return head.to(self.device).eval()

    # -- tokenizer ------------------------------------------------------------

    def tokenize(self, text: str) -> list[int]:
        ids = self.tokenizer(text, add_special_tokens=False)["input_ids"]
        specials = {self.bos_id, self.eos_id}
        return [i for i in ids if i not in specials][: self.max_content_len]

    # -- scoring ----------------------------------------------------------------

    def _wrap(self, token_ids):
        ids = [self.bos_id, *token_ids, self.eos_id]
        ids += [self.pad_id] * (self.context_len - len(ids))
        return ids[: self.context_len]

    def _generate(self, token_ids, request):
        torch = self._torch
        input_ids = torch.tensor([self._wrap(token_ids)], device=self.device)
        with torch.no_grad():
            enc1 = self.pipe.text_encoder(input_ids, output_hidden_states=True)
            enc2 = self.pipe.text_encoder_2(input_ids, output_hidden_states=True)
        prompt_embeds = torch.cat(
            [enc1.hidden_states[-2], enc2.hidden_states[-2]], dim=-1
        )
        pooled = enc2[0]
        generator = torch.Generator(device=self.device).manual_seed(
            request.generation_seed
        )
        return self.pipe(
            prompt_embeds=prompt_embeds,
            pooled_prompt_embeds=pooled,
            num_inference_steps=request.steps,
            guidance_scale=request.guidance_scale,
            width=request.width,
            height=request.height,
            generator=generator,
        ).images[0]

    def _clip_scores(self, image, prompt: str):
        torch = self._torch
        inputs = self.clip_processor(
            text=[prompt], images=[image], return_tensors="pt", padding=True, truncation=True
        ).to(self.device)
        with torch.no_grad():
            image_embeds = self.clip.get_image_features(pixel_values=inputs["pixel_values"])
            text_embeds = self.clip.get_text_features(
                input_ids=inputs["input_ids"], attention_mask=inputs["attention_mask"]
            )
            image_unit = image_embeds / image_embeds.norm(dim=-1, keepdim=True)
            text_unit = text_embeds / text_embeds.norm(dim=-1, keepdim=True)
            cosine = float((image_unit * text_unit).sum())
            aesthetic = float(self.aesthetic_head(image_unit.float()).squeeze())
        return max(1.0, min(10.0, aesthetic)), max(-1.0, min(1.0, cosine))

    def score_batch(self, request, artifact_dir: Path) -> list[ScoredItem]:
        items: list[ScoredItem] = []
        for genotype in request.batch:
            try:
                image = self._generate(genotype.token_ids, request)
                aesthetic, clip_score = self._clip_scores(image, request.prompt)
                ref = None
                if request.return_images:
                    digest = hashlib.sha256(
                        (
                            f"{request.generation_seed}:"
                            + ",".join(map(str, genotype.token_ids))
                        ).encode()
                    ).hexdigest()
                    rel = Path("images") / f"{digest}.png"
                    path = artifact_dir / rel
                    path.parent.mkdir(parents=True, exist_ok=True)
                    image.save(path)
                    ref = str(rel)
                items.append(
                    ScoredItem(aesthetic=aesthetic, clip_score=clip_score, image_ref=ref)
                )
            except Exception as exc:  # per-item inference fault
                items.append(ScoredItem(error=f"{type(exc).__name__}: {exc}"))
        return items
