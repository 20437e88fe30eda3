# -*- coding: utf-8 -*-
"""The control parameters of the pipeline steps.

Parameters
----------
generate_parameters : dict(str, dict(str, str))
    The synthetic corpus: its size, views, diseases, latent structure, noise
    and seed.
curate_parameters : dict(str, dict(str, str))
    The manifest to curate, the measurement band and negation rule tables,
    and the categories left out of the consistency checks.
train_parameters : dict(str, dict(str, str))
    The optimizer, schedule, loss weights and encoder sizes. The defaults are
    those used for the synthetic corpus.
eval_parameters : dict(str, dict(str, str))
    The checkpoint and split to evaluate, and the settings of the zero-shot,
    retrieval, k-NN and linear-probe tasks.
sweep_parameters : dict(str, dict(str, str))
    Which rows of loss weights to train and evaluate.

A value of the form ``$name`` refers to the workspace variable set by an
earlier step, e.g. the manifest written by the generate step.
"""

generate_parameters = {
    "n_samples": {
        "default": 2500,
        "kind": "integer",
        "format_string": "d",
        "description": "Number of samples:",
        "help_text": "The number of image-caption pairs to generate.",
    },
    "n_views": {
        "default": 8,
        "kind": "integer",
        "format_string": "d",
        "description": "Number of views:",
        "help_text": "The number of echocardiographic views.",
    },
    "n_diseases": {
        "default": 9,
        "kind": "integer",
        "format_string": "d",
        "description": "Number of diseases:",
        "help_text": "The number of graded diseases per sample.",
    },
    "d_latent": {
        "default": 16,
        "kind": "integer",
        "format_string": "d",
        "description": "Noise dimensions:",
        "help_text": "The number of latent dimensions holding only noise.",
    },
    "feature_dim": {
        "default": 64,
        "kind": "integer",
        "format_string": "d",
        "description": "Image features:",
        "help_text": "The length of the image feature vector.",
    },
    "noise_sigma": {
        "default": 0.1,
        "kind": "float",
        "format_string": ".3f",
        "description": "Noise:",
        "help_text": "The standard deviation of the latent noise.",
    },
    "view_scale": {
        "default": 4.0,
        "kind": "float",
        "format_string": ".2f",
        "description": "View scale:",
        "help_text": "The length of the view component of the latent vector.",
    },
    "grade_probabilities": {
        "default": "0.45, 0.25, 0.18, 0.12",
        "kind": "list",
        "item_kind": "float",
        "description": "Grade probabilities:",
        "help_text": "The probabilities of none, mild, moderate and severe.",
    },
    "split_ratios": {
        "default": "0.8, 0.1, 0.1",
        "kind": "list",
        "item_kind": "float",
        "description": "Split ratios:",
        "help_text": "The fractions of train, val and test samples.",
    },
    "seed": {
        "default": 0,
        "kind": "integer",
        "format_string": "d",
        "description": "Seed:",
        "help_text": "The seed of the random number generator.",
    },
}

curate_parameters = {
    "manifest": {
        "default": "$manifest",
        "kind": "string",
        "description": "Manifest:",
        "help_text": "The manifest to curate.",
    },
    "measurements": {
        "default": "",
        "kind": "string",
        "description": "Measurement table:",
        "help_text": "A measurement band table, by default the shipped one.",
    },
    "negation_rules": {
        "default": "",
        "kind": "string",
        "description": "Negation rules:",
        "help_text": "A negation rule table, by default the shipped one.",
    },
    "excluded_categories": {
        "default": "mitral valve disease, mitral regurgitation, stroke volume",
        "kind": "list",
        "item_kind": "string",
        "description": "Excluded categories:",
        "help_text": "Disease categories left out of the consistency checks.",
    },
    "default_margin": {
        "default": "",
        "kind": "float",
        "format_string": ".3f",
        "description": "Borderline margin:",
        "help_text": (
            "The fraction of a band's width next to its edges that is "
            "borderline, overriding the table's default."
        ),
    },
}

train_parameters = {
    "manifest": {
        "default": "$manifest",
        "kind": "string",
        "description": "Manifest:",
        "help_text": "The manifest whose training split is used.",
    },
    "base_lr": {
        "default": 3e-3,
        "kind": "float",
        "format_string": ".3g",
        "description": "Learning rate:",
        "help_text": "The peak learning rate, reached at the end of the warmup.",
    },
    "weight_decay": {
        "default": 0.005,
        "kind": "float",
        "format_string": ".3g",
        "description": "Weight decay:",
        "help_text": "The AdamW weight decay of the encoders.",
    },
    "beta1": {
        "default": 0.9,
        "kind": "float",
        "format_string": ".3f",
        "description": "Beta 1:",
        "help_text": "The AdamW first-moment decay.",
    },
    "beta2": {
        "default": 0.999,
        "kind": "float",
        "format_string": ".4f",
        "description": "Beta 2:",
        "help_text": "The AdamW second-moment decay.",
    },
    "eps": {
        "default": 1e-8,
        "kind": "float",
        "format_string": ".1e",
        "description": "Epsilon:",
        "help_text": "The AdamW epsilon.",
    },
    "batch_size": {
        "default": 64,
        "kind": "integer",
        "format_string": "d",
        "description": "Batch size:",
        "help_text": "The number of samples per step.",
    },
    "warmup_steps": {
        "default": 60,
        "kind": "integer",
        "format_string": "d",
        "description": "Warmup steps:",
        "help_text": "The number of steps of linear warmup.",
    },
    "epochs": {
        "default": 20,
        "kind": "integer",
        "format_string": "d",
        "description": "Epochs:",
        "help_text": "The number of passes over the training split.",
    },
    "lambda_view": {
        "default": 0.5,
        "kind": "float",
        "format_string": ".3f",
        "description": "View loss weight:",
        "help_text": "The weight of the view-informed contrastive loss.",
    },
    "lambda_neg": {
        "default": 0.1,
        "kind": "float",
        "format_string": ".3f",
        "description": "Negation loss weight:",
        "help_text": "The weight of the negation loss.",
    },
    "seed": {
        "default": 0,
        "kind": "integer",
        "format_string": "d",
        "description": "Seed:",
        "help_text": "Seeds the initial parameters and the batch order.",
    },
    "embed_dim": {
        "default": 32,
        "kind": "integer",
        "format_string": "d",
        "description": "Embedding dimension:",
        "help_text": "The dimension of the shared embedding space.",
    },
    "hidden_dim": {
        "default": 64,
        "kind": "integer",
        "format_string": "d",
        "description": "Hidden dimension:",
        "help_text": "The width of the hidden layers of the encoders.",
    },
    "caption_field": {
        "default": "caption",
        "kind": "enum",
        "enumeration": ("caption", "raw_report"),
        "description": "Training text:",
        "help_text": "Train on the grounded captions or the raw reports.",
    },
    "resume": {
        "default": "",
        "kind": "string",
        "description": "Resume from:",
        "help_text": "A checkpoint of a run with the same settings to continue.",
    },
    "keep_checkpoints": {
        "default": False,
        "kind": "boolean",
        "description": "Keep checkpoints:",
        "help_text": "Keep the checkpoint written after every epoch.",
    },
}

eval_parameters = {
    "checkpoint": {
        "default": "$checkpoint",
        "kind": "string",
        "description": "Checkpoint:",
        "help_text": "The checkpoint of the trained model.",
    },
    "manifest": {
        "default": "$manifest",
        "kind": "string",
        "description": "Manifest:",
        "help_text": "The manifest with the samples to evaluate.",
    },
    "prompts": {
        "default": "",
        "kind": "string",
        "description": "Prompts:",
        "help_text": "A zero-shot prompt file, by default the shipped one.",
    },
    "split": {
        "default": "test",
        "kind": "enum",
        "enumeration": ("train", "val", "test"),
        "description": "Split:",
        "help_text": "The split to evaluate.",
    },
    "knn_k": {
        "default": 20,
        "kind": "integer",
        "format_string": "d",
        "description": "k-NN neighbors:",
        "help_text": "The number of neighbors voting in k-NN classification.",
    },
    "knn_temperature": {
        "default": 0.07,
        "kind": "float",
        "format_string": ".3f",
        "description": "k-NN temperature:",
        "help_text": "The temperature of the k-NN vote weights.",
    },
    "positive_threshold": {
        "default": "mild",
        "kind": "enum",
        "enumeration": ("none", "mild", "moderate"),
        "description": "Positive above:",
        "help_text": "Grades above this one count as having the disease.",
    },
    "recall_ks": {
        "default": "5, 10",
        "kind": "list",
        "item_kind": "integer",
        "description": "Recall at:",
        "help_text": "The cutoffs k of retrieval recall@k.",
    },
    "linear_probe": {
        "default": True,
        "kind": "boolean",
        "description": "Linear probe:",
        "help_text": "Also classify views with a linear probe.",
    },
    "probe_lr": {
        "default": 1e-2,
        "kind": "float",
        "format_string": ".3g",
        "description": "Probe learning rate:",
        "help_text": "The peak learning rate of the linear probe.",
    },
    "probe_weight_decay": {
        "default": 0.005,
        "kind": "float",
        "format_string": ".3g",
        "description": "Probe weight decay:",
        "help_text": "The AdamW weight decay of the linear probe.",
    },
    "probe_epochs": {
        "default": 100,
        "kind": "integer",
        "format_string": "d",
        "description": "Probe epochs:",
        "help_text": "The number of epochs of linear-probe training.",
    },
    "probe_warmup_epochs": {
        "default": 10,
        "kind": "integer",
        "format_string": "d",
        "description": "Probe warmup epochs:",
        "help_text": "The number of warmup epochs of linear-probe training.",
    },
    "probe_batch_size": {
        "default": 64,
        "kind": "integer",
        "format_string": "d",
        "description": "Probe batch size:",
        "help_text": "The batch size of linear-probe training.",
    },
}

sweep_parameters = {
    "rows": {
        "default": "all",
        "kind": "enum",
        "enumeration": ("all", "loss ratios", "objectives"),
        "description": "Rows:",
        "help_text": (
            "Sweep the loss-ratio rows, the objective-ablation rows, or both."
        ),
    },
}

# The rows of the sweeps as (label, lambda_view, lambda_neg)
loss_ratio_rows = (
    ("ratio 1.0/1.0", 1.0, 1.0),
    ("ratio 0.25/0.5", 0.25, 0.5),
    ("ratio 0.5/0.5", 0.5, 0.5),
    ("ratio 0.5/0.1", 0.5, 0.1),
)
objective_rows = (
    ("clip only", 0.0, 0.0),
    ("clip + view", 0.5, 0.0),
    ("clip + negation", 0.0, 0.1),
    ("clip + view + negation", 0.5, 0.1),
)

sections = {
    "generate": generate_parameters,
    "curate": curate_parameters,
    "train": train_parameters,
    "eval": eval_parameters,
    "sweep": sweep_parameters,
}
