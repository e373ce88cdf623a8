# hazsurf/real_life_samples/rotterdam/__init__.py
