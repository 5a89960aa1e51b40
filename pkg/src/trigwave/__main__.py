from trigwave.cli import entry

entry()
