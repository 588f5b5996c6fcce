"""One-shot SDXL img2img worker.

Reads a job description as JSON on stdin, runs a single image-to-image pass,
writes the result PNG, exits. The adapter spawns one worker per transform
request so GPU state never leaks between frames.

Job fields: model, device, precision, input_path, output_path, seed, prompt,
negative_prompt, strength, guidance_scale, width, height.
"""

import json
import sys


def run(job: dict) -> None:
    import torch
    from diffusers import StableDiffusionXLImg2ImgPipeline
    from PIL import Image

    dtype = torch.float16 if job["precision"] == "fp16" else torch.float32
    pipe = StableDiffusionXLImg2ImgPipeline.from_pretrained(
        job["model"], torch_dtype=dtype
    )
    pipe = pipe.to(job["device"])

    source = Image.open(job["input_path"]).convert("RGB")
    # Inference runs at the model's native resolution; the wire contract
    # requires output dims to match the input, so resize back afterwards.
    resized = source.resize((job["width"], job["height"]), Image.LANCZOS)
    generator = torch.Generator(device=job["device"]).manual_seed(job["seed"])
    result = pipe(
        prompt=job["prompt"],
        negative_prompt=job["negative_prompt"],
        image=resized,
        strength=job["strength"],
        guidance_scale=job["guidance_scale"],
        generator=generator,
    ).images[0]
    result.resize(source.size, Image.LANCZOS).save(job["output_path"], format="PNG")


def main() -> int:
    try:
        job = json.load(sys.stdin)
    except json.JSONDecodeError as err:
        print(f"bad job: {err}", file=sys.stderr)
        return 2
    try:
        run(job)
    except Exception as err:  # surface the cause, adapter relays it
        print(f"{type(err).__name__}: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
