"""
A live inference session over the wire
======================================

The service speaks newline-delimited JSON over TCP. A client greets,
optionally replaces the scene, then streams hand (and gaze) samples;
every hand message comes back with a posterior heat-map frame and a
decision. This script runs server and client in one process and
narrates a session.
"""

import asyncio
import base64
import json

import numpy as np

from _shared import quick_net
from reachintent import generator as gen, inference as inf
from reachintent import kinematics as kin, service, tasksim

net = quick_net()
runtime = service.ServiceRuntime(
    grid=inf.build_cache(inf.default_grid(), inf.SurrogateGenerator(net)),
    net=net, scene=tasksim.default_task_scene(seed=0))

# the hand motion we will stream: a simulated reach for object 9
model = kin.default_arm_model()
target = np.asarray(runtime.scene.objects[9].position)
pts, _ = gen.simulate_reach(model, gen.ControllerGains(),
                            gen.empty_scene(), gen.rest_posture(model),
                            target)
pts = pts + np.random.default_rng(1).normal(0.0, 0.005, pts.shape)


async def rpc(reader, writer, doc, n_replies=1):
    writer.write((json.dumps(doc) + "\n").encode())
    await writer.drain()
    return [json.loads(await reader.readline()) for _ in range(n_replies)]


async def main():
    server = await service.start_tcp(runtime, port=0)
    port = server.sockets[0].getsockname()[1]
    print(f"service listening on 127.0.0.1:{port}")

    reader, writer = await asyncio.open_connection("127.0.0.1", port)
    (ready,) = await rpc(reader, writer,
                         {"type": "hello", "proto": service.PROTO_VERSION})
    g = ready["grid"]
    print(f"handshake: grid {g['nx']}x{g['ny']}, cell {g['cell_size']} m\n")

    print(f"streaming a {len(pts)}-point reach toward object 9:")
    for i, p in enumerate(pts):
        frame, decision = await rpc(
            reader, writer,
            {"type": "hand", "t": i / 30.0, "p": [float(v) for v in p]},
            n_replies=2)
        if i % 22 == 0 or i == len(pts) - 1:
            weights = np.frombuffer(
                base64.b64decode(frame["weights_u8"]), dtype=np.uint8)
            probs = decision["object_probs"]
            best = max(probs, key=probs.get)
            print(f"  t={i / 30.0:5.2f} s: heat map {len(weights)} cells, "
                  f"likeliest object {best} (p={probs[best]:.2f}), "
                  f"robot can safely take {decision['safe_object']}, "
                  f"latency {decision['latency_ms']:.1f} ms")

    # reset drops the observation buffer; the next frame is prior-only
    await rpc(reader, writer, {"type": "reset"}, n_replies=0)
    frame, decision = await rpc(
        reader, writer, {"type": "hand", "t": 10.0, "p": [0.0, 0.2, 0.0]},
        n_replies=2)
    probs = decision["object_probs"]
    spread = max(probs.values()) - min(probs.values())
    print(f"\nafter reset the posterior falls back to the prior "
          f"(object probability spread {spread:.2f})")

    writer.close()
    await writer.wait_closed()
    server.close()
    await server.wait_closed()


asyncio.run(main())
