# Request validators
