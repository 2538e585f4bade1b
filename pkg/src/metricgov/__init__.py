"""Constitutional governance over metric spaces."""
