# SimReuse model-maintenance package
