ARCHITECTURES = {
    # two 2x2 convolutions without padding, as used for the image-like domains
    "conv": {
        "filters": 32,
        "kernel_size": 2,
        "hidden_dim": 128,
    },
    # flattened input through one fully-connected layer; small puzzles
    "dense": {
        "trunk_dim": 128,
        "hidden_dim": 128,
    },
}

OPTIMIZER = {
    "lr": 1e-4,
    "weight_decay": 1e-3,
}

CHECKPOINT_VERSION = 1
