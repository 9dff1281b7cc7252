"""Train the contrastive embedding and the masked reconstructor jointly.

The query encoder learns to pull frames of the same snippet together and
push every other snippet (and a FIFO memory of past key embeddings) away,
while the attention encoder learns to reconstruct a masked frame from its
neighbours. Both objectives backpropagate into the query encoder; the key
encoder only trails it through a momentum update.

This is a scaled-down run so it finishes in seconds; the reconstruction
loss drops quickly, the contrastive loss moves slowly because the memory
queue keeps refilling with fresh negatives.
"""

import dataclasses

from eventseg import RunConfig, synth_generate, run_training

cfg = RunConfig()
cfg.synth = dataclasses.replace(cfg.synth, num_videos=12)
cfg.training = dataclasses.replace(cfg.training, steps=150, batch_videos=8)
cfg.model = dataclasses.replace(cfg.model, queue_capacity=512)

corpus, _ = synth_generate(cfg.synth)
print(f"training on {len(corpus)} videos, {cfg.training.steps} steps")

result = run_training(
    corpus, cfg,
    progress=lambda step, losses: print(
        f"  step {step:4d}  contrastive {losses['contrastive']:.3f}  "
        f"reconstruction {losses['reconstruction']:.3f}"
    ),
)

first, last = result.history[0], result.history[-1]
print(f"\nreconstruction loss: {first['reconstruction']:.3f} -> {last['reconstruction']:.3f}")
print(f"contrastive loss:    {first['contrastive']:.3f} -> {last['contrastive']:.3f}")
print(f"queue filled to {len(result.queue)} / {result.queue.capacity} entries")
