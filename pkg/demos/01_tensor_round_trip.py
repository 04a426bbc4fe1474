"""Build a small feature tensor by hand, write it to disk, and read it back.

The on-disk layout is a fixed little-endian header followed by the float32
payload in channel-major order and a single trailing flags byte.  Everything
here is inspectable with a hex dump, which is the point of the demo.
"""

import os
import struct
import tempfile

import numpy as np

from crow import FeatureTensor, read_tensor, tensor_bytes, write_tensor
from crow import iter_corpus, read_manifest, write_manifest

out_dir = tempfile.mkdtemp(prefix="crow_demo_")

# A 2-channel 3x2 map.  Channel 0 has a single strong activation, channel 1
# is a gentle ramp.  Values are float64 in memory, float32 on disk.
data = np.zeros((2, 3, 2))
data[0, 1, 0] = 5.0
data[1] = np.arange(6).reshape(3, 2) * 0.25
t = FeatureTensor(data, id="demo_image")

print("tensor:", t.shape, "non-negative:", t.nonneg)

path = os.path.join(out_dir, "demo_image.crowt")
write_tensor(t, path)
raw = open(path, "rb").read()
print("file size:", len(raw), "bytes (20 header + %d payload + 1 flags)" % (4 * data.size))

magic, version, dtype, _, k, w, h = struct.unpack("<4sBBHIII", raw[:20])
print("header:", magic, "version", version, "dtype", dtype, "dims", (k, w, h))
print("flags byte:", raw[-1], "(bit 0 set because every value is >= 0)")

back = read_tensor(path)
print("round trip exact:", np.array_equal(back.data, t.data), "id:", back.id)

# The flags byte is advisory: the reader recomputes non-negativity from the
# payload, so a negative value flips it no matter what was written.
neg = FeatureTensor(data - 1.0, id="neg")
print("negative variant flag:", read_tensor(tensor_bytes(neg)).nonneg)

# A corpus is just a directory of .crowt files plus an optional manifest
# of <id>\t<relative-path> lines that pins the iteration order.
for i in range(3):
    write_tensor(t.with_id("img_%d" % i), os.path.join(out_dir, "img_%d.crowt" % i))
os.remove(path)
order = [("img_2", "img_2.crowt"), ("img_0", "img_0.crowt"), ("img_1", "img_1.crowt")]
write_manifest(order, os.path.join(out_dir, "manifest.tsv"))
print("manifest order:", [i for i, _ in read_manifest(os.path.join(out_dir, "manifest.tsv"))])
print("corpus walk:   ", [x.id for x in iter_corpus(out_dir)])
